#pragma once

// Linear CTR estimator over the tree feature space and its Gaussian posterior.
//
// The posterior follows Bayesian linear regression with prior N(0, sigma^2 I):
//   B = I + sum x x^T,   f = sum r x,   w_mean = B^{-1} f,
// and Thompson draws come from N(w_mean, sigma^2 B^{-1}).

#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <fmt/format.h>

#include "aes/common.hpp"
#include "aes/graph.hpp"

namespace aes {

inline constexpr std::string_view kPosteriorHeader = "AES-POSTERIOR-v1";

/// b + sum of chosen vertex weights + sum of chosen tree-edge weights.
inline double expected_reward(const WeightVector& weights, const FeatureIndexer& indexer, const Creative& c)
{
    if (static_cast<std::size_t>(weights.size()) != indexer.dimension())
        throw Error("weight vector length does not match the feature dimension");
    return indexer.featurize(c).dot(weights);
}

struct PosteriorOptions {
    double sigma = 1.0;
    /// Rebuild B^{-1} from B after this many rank-1 updates.
    std::size_t recompute_interval = 1000;
};

class PosteriorState {
public:
    PosteriorState() = default;

    explicit PosteriorState(std::size_t dim, PosteriorOptions options = {}) : options_(options)
    {
        if (dim == 0) throw Error("posterior dimension must be positive");
        if (!(options_.sigma >= 0.0) || !std::isfinite(options_.sigma)) throw Error("sigma must be finite and >= 0");
        if (options_.recompute_interval == 0) throw Error("recompute_interval must be positive");
        const auto k = static_cast<Eigen::Index>(dim);
        b_ = Eigen::MatrixXd::Identity(k, k);
        b_inv_ = Eigen::MatrixXd::Identity(k, k);
        f_ = Eigen::VectorXd::Zero(k);
    }

    std::size_t dim() const { return static_cast<std::size_t>(f_.size()); }
    double sigma() const { return options_.sigma; }
    const PosteriorOptions& options() const { return options_; }
    const Eigen::MatrixXd& precision() const { return b_; }
    const Eigen::MatrixXd& precision_inverse() const { return b_inv_; }
    const Eigen::VectorXd& f() const { return f_; }
    std::size_t update_count() const { return update_count_; }
    std::size_t recompute_count() const { return recompute_count_; }

    /// Bumped on every change; lets callers cache anything derived from the state.
    std::uint64_t version() const { return version_; }

    const WeightVector& mean() const
    {
        if (!mean_) mean_ = b_inv_ * f_;
        return *mean_;
    }

    void update(const SparseFeatures& x, double reward)
    {
        check_reward(reward);
        const auto k = b_.rows();
        Eigen::VectorXd u = Eigen::VectorXd::Zero(k);
        for (auto a : x.index) {
            if (a >= dim()) throw Error("feature index out of range");
            u += b_inv_.col(static_cast<Eigen::Index>(a));
        }
        double denom = 1.0;
        for (auto a : x.index) {
            denom += u[static_cast<Eigen::Index>(a)];
            for (auto c : x.index) b_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c)) += 1.0;
            f_[static_cast<Eigen::Index>(a)] += reward;
        }
        downdate_inverse(u, denom);
        after_update();
    }

    void update(const Eigen::VectorXd& x, double reward)
    {
        check_reward(reward);
        if (x.size() != b_.rows()) throw Error("feature vector length does not match the posterior dimension");
        Eigen::VectorXd u = b_inv_ * x;
        const double denom = 1.0 + x.dot(u);
        b_.selfadjointView<Eigen::Lower>().rankUpdate(x, 1.0);
        mirror_lower(b_);
        f_ += reward * x;
        downdate_inverse(u, denom);
        after_update();
    }

    /// Applies observations in order. Large batches accumulate B and f directly
    /// and refactorize once, which is cheaper than one rank-1 step per row.
    void update_batch(std::span<const SparseFeatures> xs, std::span<const double> rewards)
    {
        if (xs.size() != rewards.size()) throw Error("batch features and rewards differ in length");
        if (xs.size() < dim()) {
            for (std::size_t i = 0; i < xs.size(); ++i) update(xs[i], rewards[i]);
            return;
        }
        for (std::size_t i = 0; i < xs.size(); ++i) {
            check_reward(rewards[i]);
            for (auto a : xs[i].index) {
                if (a >= dim()) throw Error("feature index out of range");
                for (auto c : xs[i].index) b_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c)) += 1.0;
                f_[static_cast<Eigen::Index>(a)] += rewards[i];
            }
        }
        update_count_ += xs.size();
        recompute();
    }

    /// Rebuilds B^{-1} from B by Cholesky factorization.
    void recompute()
    {
        Eigen::LLT<Eigen::MatrixXd> llt(b_);
        if (llt.info() != Eigen::Success) throw PosteriorError("precision matrix is not positive definite");
        b_inv_ = llt.solve(Eigen::MatrixXd::Identity(b_.rows(), b_.cols()));
        mirror_lower(b_inv_);
        since_recompute_ = 0;
        ++recompute_count_;
        invalidate();
    }

    /// ||B B^{-1} - I||_inf
    double inverse_residual() const
    {
        Eigen::MatrixXd r = b_ * b_inv_ - Eigen::MatrixXd::Identity(b_.rows(), b_.cols());
        return r.cwiseAbs().rowwise().sum().maxCoeff();
    }

    /// Lower Cholesky factor L of B^{-1} (L L^T = B^{-1}); cached until the next update.
    const Eigen::MatrixXd& covariance_factor() const
    {
        if (!factor_) {
            Eigen::LLT<Eigen::MatrixXd> llt(b_inv_);
            if (llt.info() != Eigen::Success) throw PosteriorError("posterior covariance is not positive definite");
            factor_ = Eigen::MatrixXd(llt.matrixL());
        }
        return *factor_;
    }

    void set_sigma(double sigma)
    {
        if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw Error("sigma must be finite and >= 0");
        options_.sigma = sigma;
        ++version_;
    }

    /// Text checkpoint: header line, then dim, sigma, update_count,
    /// recompute_interval, the K x K matrix B row by row, and f.
    void save(std::ostream& out) const
    {
        out << kPosteriorHeader << '\n';
        out << "dim " << dim() << '\n';
        out << fmt::format("sigma {}\n", options_.sigma);
        out << "update_count " << update_count_ << '\n';
        out << "recompute_interval " << options_.recompute_interval << '\n';
        out << "B\n";
        for (Eigen::Index r = 0; r < b_.rows(); ++r) {
            for (Eigen::Index c = 0; c < b_.cols(); ++c) out << (c ? " " : "") << fmt::format("{}", b_(r, c));
            out << '\n';
        }
        out << "f\n";
        for (Eigen::Index r = 0; r < f_.size(); ++r) out << (r ? " " : "") << fmt::format("{}", f_[r]);
        out << '\n';
    }

    static PosteriorState load(std::istream& in)
    {
        std::string line;
        if (!std::getline(in, line) || line != kPosteriorHeader) throw Error("not a posterior checkpoint (bad header)");
        auto expect = [&](const char* key) {
            std::string k;
            if (!(in >> k) || k != key) throw Error(std::string("checkpoint: expected '") + key + "'");
        };
        std::size_t dim = 0, count = 0;
        PosteriorOptions opt;
        expect("dim");
        in >> dim;
        expect("sigma");
        in >> opt.sigma;
        expect("update_count");
        in >> count;
        expect("recompute_interval");
        in >> opt.recompute_interval;
        if (!in) throw Error("checkpoint: malformed header fields");
        PosteriorState st(dim, opt);
        expect("B");
        for (Eigen::Index r = 0; r < st.b_.rows(); ++r)
            for (Eigen::Index c = 0; c < st.b_.cols(); ++c) in >> st.b_(r, c);
        expect("f");
        for (Eigen::Index r = 0; r < st.f_.size(); ++r) in >> st.f_[r];
        if (!in) throw Error("checkpoint: truncated matrix data");
        st.update_count_ = count;
        st.recompute();
        st.recompute_count_ = 0;
        return st;
    }

private:
    static void check_reward(double reward)
    {
        if (!std::isfinite(reward)) throw Error("reward must be finite");
    }

    static void mirror_lower(Eigen::MatrixXd& m)
    {
        m.triangularView<Eigen::StrictlyUpper>() = m.transpose();
    }

    // Sherman-Morrison: (B + x x^T)^{-1} = B^{-1} - u u^T / (1 + x^T u), u = B^{-1} x.
    void downdate_inverse(const Eigen::VectorXd& u, double denom)
    {
        b_inv_.selfadjointView<Eigen::Lower>().rankUpdate(u, -1.0 / denom);
        mirror_lower(b_inv_);
    }

    void after_update()
    {
        ++update_count_;
        if (++since_recompute_ >= options_.recompute_interval) recompute();
        invalidate();
    }

    void invalidate()
    {
        mean_.reset();
        factor_.reset();
        ++version_;
    }

    PosteriorOptions options_;
    Eigen::MatrixXd b_;
    Eigen::MatrixXd b_inv_;
    Eigen::VectorXd f_;
    std::size_t update_count_ = 0;
    std::size_t since_recompute_ = 0;
    std::size_t recompute_count_ = 0;
    std::uint64_t version_ = 0;
    mutable std::optional<WeightVector> mean_;
    mutable std::optional<Eigen::MatrixXd> factor_;
};

/// One draw from N(w_mean, sigma^2 B^{-1}).
inline WeightVector sample_weights(const PosteriorState& posterior, Rng& rng)
{
    if (posterior.sigma() == 0.0) return posterior.mean();
    const auto& l = posterior.covariance_factor();
    Eigen::VectorXd z(static_cast<Eigen::Index>(posterior.dim()));
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = standard_normal(rng);
    Eigen::VectorXd lz = l.triangularView<Eigen::Lower>() * z;
    return posterior.mean() + posterior.sigma() * lz;
}

} // namespace aes
