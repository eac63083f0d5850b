#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>

namespace aes {

/// Raised for invalid inputs: malformed graphs, infeasible creatives, bad files.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The posterior covariance lost positive definiteness; the caller should
/// rebuild the maintained inverse from scratch.
class PosteriorError : public Error {
public:
    using Error::Error;
};

// std::mt19937_64 and std::seed_seq are fully specified by the standard, and
// the Boost distributions are header code, so a seed fixes every draw on
// every platform.
using Rng = std::mt19937_64;

inline Rng make_rng(std::initializer_list<std::uint64_t> keys)
{
    std::vector<std::uint32_t> words;
    words.reserve(keys.size() * 2);
    for (auto k : keys) {
        words.push_back(static_cast<std::uint32_t>(k & 0xffffffffu));
        words.push_back(static_cast<std::uint32_t>(k >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

inline double uniform01(Rng& rng) { return boost::random::uniform_01<double>{}(rng); }

inline std::size_t uniform_index(Rng& rng, std::size_t n)
{
    return boost::random::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline double standard_normal(Rng& rng) { return boost::random::normal_distribution<double>{}(rng); }

} // namespace aes
