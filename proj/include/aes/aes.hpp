#pragma once

#include "aes/common.hpp"
#include "aes/graph.hpp"
#include "aes/ctr_model.hpp"
#include "aes/dp.hpp"
#include "aes/policies.hpp"
#include "aes/environment.hpp"
#include "aes/experiment.hpp"
#include "aes/io.hpp"
#include "aes/random_graph.hpp"
