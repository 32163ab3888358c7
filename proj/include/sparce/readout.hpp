#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "sparce/rng.hpp"
#include "sparce/types.hpp"

namespace sparce {

enum class ReadoutMode { last_state, concat_all, strided };

/// How the readout vector V-tilde is assembled from a T x N trajectory:
/// the last state, the concatenation of all states, or states sampled at
/// times t = stride, 2*stride, ... <= T (node-major within each step).
struct ReadoutPlan {
    ReadoutMode mode = ReadoutMode::last_state;
    Index stride = 1;

    std::vector<Index> sampled_steps(Index t_len) const {  // 0-based row indices
        require(t_len >= 1, "ReadoutPlan: empty trajectory");
        std::vector<Index> steps;
        switch (mode) {
            case ReadoutMode::last_state:
                steps.push_back(t_len - 1);
                break;
            case ReadoutMode::concat_all:
                for (Index t = 0; t < t_len; ++t) steps.push_back(t);
                break;
            case ReadoutMode::strided:
                require(stride >= 1, "ReadoutPlan: stride must be >= 1");
                require(stride <= t_len, "ReadoutPlan: stride exceeds sequence length (empty sample set)");
                for (Index t = stride; t <= t_len; t += stride) steps.push_back(t - 1);
                break;
        }
        return steps;
    }

    Index dim(Index n_nodes, Index t_len) const {
        return n_nodes * static_cast<Index>(sampled_steps(t_len).size());
    }
};

template <class Derived>
Vector<typename Derived::Scalar> assemble_readout(const Eigen::MatrixBase<Derived>& trajectory,
                                                  const ReadoutPlan& plan) {
    using Scalar = typename Derived::Scalar;
    const auto steps = plan.sampled_steps(trajectory.rows());
    const Index n = trajectory.cols();
    Vector<Scalar> v(static_cast<Index>(steps.size()) * n);
    Index offset = 0;
    for (Index t : steps) {
        v.segment(offset, n) = trajectory.row(t).transpose();
        offset += n;
    }
    return v;
}

/// The SpaRCe readout: per-dimension threshold theta_i = theta_base_i +
/// theta_adapt_i applied symmetrically to V-tilde, followed by a linear map.
/// theta_base holds the frozen percentile initialisation P_n(|V-tilde_i|);
/// theta_adapt is the learnable component (zero-initialised). w_out starts
/// at zero so the first threshold updates vanish and weights lead learning.
template <class Scalar>
struct SparseReadout {
    Vector<Scalar> theta_base;
    Vector<Scalar> theta_adapt;
    Matrix<Scalar> w_out;  // D x N_class
    double percentile_n = 50.0;

    Index dim() const { return w_out.rows(); }
    Index n_class() const { return w_out.cols(); }
    Vector<Scalar> theta() const { return theta_base + theta_adapt; }
};

template <class Scalar = double>
SparseReadout<Scalar> make_readout(Index dim, Index n_class, double percentile_n = 50.0) {
    require(dim >= 1 && n_class >= 1, "make_readout: dim and n_class must be >= 1");
    require(percentile_n >= 0.0 && percentile_n <= 100.0,
            "make_readout: percentile must be in [0, 100]");
    SparseReadout<Scalar> ro;
    ro.theta_base = Vector<Scalar>::Zero(dim);
    ro.theta_adapt = Vector<Scalar>::Zero(dim);
    ro.w_out = Matrix<Scalar>::Zero(dim, n_class);
    ro.percentile_n = percentile_n;
    return ro;
}

namespace detail {

// n-th percentile with linear interpolation between closest ranks;
// mutates its scratch buffer.
template <class Scalar>
Scalar percentile_of(std::vector<Scalar>& values, double n) {
    const auto m = static_cast<Index>(values.size());
    require(m >= 1, "percentile: empty sample");
    const double rank = (n / 100.0) * static_cast<double>(m - 1);
    const Index lo = static_cast<Index>(rank);
    const Index hi = std::min(lo + 1, m - 1);
    const double frac = rank - static_cast<double>(lo);
    std::nth_element(values.begin(), values.begin() + lo, values.end());
    const Scalar v_lo = values[static_cast<std::size_t>(lo)];
    if (hi == lo || frac == 0.0) return v_lo;
    const Scalar v_hi = *std::min_element(values.begin() + lo + 1, values.end());
    return static_cast<Scalar>(v_lo + frac * (v_hi - v_lo));
}

}  // namespace detail

/// Streaming collector for the percentile initialisation. Rows are kept
/// exactly while rows*dim stays within `scalar_budget`; beyond that the
/// collector switches to uniform reservoir sampling of rows (default cap
/// 50k samples per dimension), which keeps the per-dimension percentile an
/// unbiased approximation on arbitrarily long streams.
template <class Scalar>
class PercentileAccumulator {
  public:
    explicit PercentileAccumulator(Index dim, std::uint64_t seed = 0,
                                   std::int64_t scalar_budget = 2'000'000'000LL,
                                   Index max_rows = 50'000)
        : dim_(dim), seed_(seed), scalar_budget_(scalar_budget), max_rows_(max_rows) {
        require(dim >= 1, "PercentileAccumulator: dim must be >= 1");
        engine_ = make_engine(derive_seed(seed, "percentile.reservoir"));
    }

    template <class Derived>
    void add(const Eigen::MatrixBase<Derived>& v) {
        require(v.size() == dim_, "PercentileAccumulator: dimension mismatch");
        ++seen_;
        const Index cap = row_cap();
        if (static_cast<Index>(rows_.size()) < cap) {
            rows_.emplace_back(v.cwiseAbs());
            return;
        }
        sampling_ = true;
        // reservoir sampling (Algorithm R): keep each of the first k rows
        // with probability k/seen
        std::uniform_int_distribution<std::int64_t> pick(0, seen_ - 1);
        const std::int64_t slot = pick(engine_);
        if (slot < static_cast<std::int64_t>(rows_.size()))
            rows_[static_cast<std::size_t>(slot)] = v.cwiseAbs();
    }

    std::int64_t count() const { return seen_; }
    bool sampled() const { return sampling_; }

    /// Per-dimension n-th percentile of |values| over the collected stream.
    Vector<Scalar> finish(double n) const {
        require(n >= 0.0 && n <= 100.0, "percentile must be in [0, 100]");
        require(!rows_.empty(), "fit_percentile: empty training stream");
        Vector<Scalar> out(dim_);
        std::vector<Scalar> column(rows_.size());
        for (Index i = 0; i < dim_; ++i) {
            for (std::size_t r = 0; r < rows_.size(); ++r) column[r] = rows_[r][i];
            out[i] = detail::percentile_of(column, n);
        }
        return out;
    }

  private:
    Index row_cap() const {
        // exact while rows*dim fits the scalar budget; the sampling reservoir
        // never shrinks below max_rows_ samples per dimension
        const Index by_budget = std::max<Index>(Index(1), static_cast<Index>(scalar_budget_ / dim_));
        return std::max(max_rows_, by_budget);
    }

    Index dim_;
    std::uint64_t seed_;
    std::int64_t scalar_budget_;
    Index max_rows_;
    std::int64_t seen_ = 0;
    bool sampling_ = false;
    std::vector<Vector<Scalar>> rows_;
    std::mt19937_64 engine_;
};

/// Exact percentile initialisation over an in-memory bank of readouts
/// (rows = samples). theta_base_i = n-th percentile of |bank(:, i)|.
template <class Derived>
Vector<typename Derived::Scalar> fit_percentile(const Eigen::MatrixBase<Derived>& bank, double n) {
    using Scalar = typename Derived::Scalar;
    require(bank.rows() >= 1, "fit_percentile: empty training stream");
    require(n >= 0.0 && n <= 100.0, "fit_percentile: percentile must be in [0, 100]");
    const Index m = bank.rows(), d = bank.cols();
    Vector<Scalar> out(d);
    std::vector<Scalar> column(static_cast<std::size_t>(m));
    for (Index i = 0; i < d; ++i) {
        for (Index r = 0; r < m; ++r) column[static_cast<std::size_t>(r)] = std::abs(bank(r, i));
        out[i] = detail::percentile_of(column, n);
    }
    return out;
}

/// x_i = sign(v_i) relu(|v_i| - theta_i); sign(0) = 0 and exact ties give 0.
template <class Scalar, class Derived>
void threshold_activity(const Eigen::MatrixBase<Derived>& v, const SparseReadout<Scalar>& ro,
                        Vector<Scalar>& x) {
    require(v.size() == ro.dim(), "threshold_activity: dimension mismatch");
    x = (v.derived().array().sign() *
         (v.derived().array().abs() - ro.theta_base.array() - ro.theta_adapt.array())
             .max(Scalar(0)))
            .matrix();
}

template <class Scalar, class Derived>
Vector<Scalar> threshold_activity(const Eigen::MatrixBase<Derived>& v,
                                  const SparseReadout<Scalar>& ro) {
    Vector<Scalar> x;
    threshold_activity(v, ro, x);
    return x;
}

/// y = W_o^T x; x is returned for gradient reuse.
template <class Scalar, class Derived>
void forward(const Eigen::MatrixBase<Derived>& v, const SparseReadout<Scalar>& ro,
             Vector<Scalar>& x, Vector<Scalar>& y) {
    threshold_activity(v, ro, x);
    y.noalias() = ro.w_out.transpose() * x;
}

/// Thresholding-free readout path (the standard-ESN route); kept separate
/// so the theta_adapt = -theta_base equivalence can be checked against an
/// independent code path.
template <class DerivedV, class DerivedW>
Vector<typename DerivedW::Scalar> linear_forward(const Eigen::MatrixBase<DerivedV>& v,
                                                 const Eigen::MatrixBase<DerivedW>& w_out) {
    require(v.size() == w_out.rows(), "linear_forward: dimension mismatch");
    return w_out.transpose() * v.derived();
}

/// Fraction of nonzero entries over a batch of thresholded activities.
template <class Derived>
double sparsity_level(const Eigen::MatrixBase<Derived>& x_batch) {
    using Scalar = typename Derived::Scalar;
    require(x_batch.rows() >= 1, "sparsity_level: empty batch");
    const auto active = (x_batch.derived().array() != Scalar(0)).count();
    return static_cast<double>(active) / static_cast<double>(x_batch.size());
}

}  // namespace sparce
