#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "sparce/types.hpp"

namespace sparce {

/// Argmax over class outputs; ties resolve to the lowest class index.
template <class Derived>
Index argmax_class(const Eigen::MatrixBase<Derived>& y) {
    require(y.size() >= 1, "argmax_class: empty output");
    Index best = 0;
    for (Index j = 1; j < y.size(); ++j)
        if (y[j] > y[best]) best = j;
    return best;
}

template <class Derived>
double accuracy(const Eigen::MatrixBase<Derived>& outputs, const std::vector<int>& labels) {
    require(outputs.rows() == static_cast<Index>(labels.size()),
            "accuracy: outputs/labels size mismatch");
    require(!labels.empty(), "accuracy: empty batch");
    Index hits = 0;
    for (Index r = 0; r < outputs.rows(); ++r) {
        if (argmax_class(outputs.row(r).transpose()) == labels[static_cast<std::size_t>(r)])
            ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

/// Root mean square error of raw outputs against targets, averaged over
/// every (sample, class) entry.
template <class DerivedA, class DerivedB>
double rmse(const Eigen::MatrixBase<DerivedA>& outputs,
            const Eigen::MatrixBase<DerivedB>& targets) {
    require(outputs.rows() == targets.rows() && outputs.cols() == targets.cols(),
            "rmse: shape mismatch");
    require(outputs.size() > 0, "rmse: empty batch");
    const double mse = (outputs.derived().template cast<double>() -
                        targets.derived().template cast<double>())
                           .array()
                           .square()
                           .sum() /
                       static_cast<double>(outputs.size());
    return std::sqrt(mse);
}

/// Per-node, per-class activation counts: n_active(i, j) counts the times
/// node i had x_i != 0 on a presentation of class j; m_presented(j) counts
/// presentations of class j.
struct ActivationCounts {
    Matrix<std::int64_t> n_active;     // N x C
    Vector<std::int64_t> m_presented;  // C

    ActivationCounts() = default;
    ActivationCounts(Index n_nodes, Index n_class)
        : n_active(Matrix<std::int64_t>::Zero(n_nodes, n_class)),
          m_presented(Vector<std::int64_t>::Zero(n_class)) {}

    Index n_nodes() const { return n_active.rows(); }
    Index n_class() const { return n_active.cols(); }

    template <class Derived>
    void accumulate(const Eigen::MatrixBase<Derived>& x, Index cls) {
        using Scalar = typename Derived::Scalar;
        require(x.size() == n_active.rows(), "ActivationCounts: dimension mismatch");
        require(cls >= 0 && cls < n_active.cols(), "ActivationCounts: class out of range");
        for (Index i = 0; i < x.size(); ++i)
            if (x[i] != Scalar(0)) ++n_active(i, cls);
        ++m_presented(cls);
    }
};

struct SpecializationResult {
    Vector<double> per_node;  // Sp_i
    double mean = 0.0;        // Sp
};

/// Specialization: spec_ijk = |N_ij/M_j - N_ik/M_k| over class pairs j<k;
/// Sp_i averages the strictly positive pair values (0 if every pair is 0);
/// Sp is the population mean. Requires every class to have been presented.
/// With `allow_missing_classes`, classes with zero presentations are skipped
/// instead (used for per-minibatch traces where not all classes appear).
inline SpecializationResult specialization(const ActivationCounts& counts,
                                           bool allow_missing_classes = false) {
    const Index n = counts.n_nodes(), c = counts.n_class();
    if (!allow_missing_classes)
        require((counts.m_presented.array() >= 1).all(),
                "specialization: a class has zero presentations");
    SpecializationResult out;
    out.per_node = Vector<double>::Zero(n);
    for (Index i = 0; i < n; ++i) {
        double sum = 0.0;
        Index positive = 0;
        for (Index j = 0; j < c; ++j) {
            if (counts.m_presented[j] < 1) continue;
            const double fj = static_cast<double>(counts.n_active(i, j)) /
                              static_cast<double>(counts.m_presented[j]);
            for (Index k = j + 1; k < c; ++k) {
                if (counts.m_presented[k] < 1) continue;
                const double fk = static_cast<double>(counts.n_active(i, k)) /
                                  static_cast<double>(counts.m_presented[k]);
                const double s = std::abs(fj - fk);
                if (s > 0.0) {
                    sum += s;
                    ++positive;
                }
            }
        }
        out.per_node[i] = positive > 0 ? sum / static_cast<double>(positive) : 0.0;
    }
    out.mean = n > 0 ? out.per_node.mean() : 0.0;
    return out;
}

/// acc(n, m): accuracy of dataset n after training through dataset m
/// (defined for n <= m, 0-based storage); acc_seen(n): pooled accuracy over
/// datasets 1..n after training dataset n.
struct TaskAccuracyMatrix {
    Matrix<double> acc;        // N_task x N_task, lower-triangular-defined
    Vector<double> acc_seen;   // N_task

    TaskAccuracyMatrix() = default;
    explicit TaskAccuracyMatrix(Index n_task)
        : acc(Matrix<double>::Constant(n_task, n_task, -1.0)),
          acc_seen(Vector<double>::Constant(n_task, -1.0)) {}

    Index n_task() const { return acc.rows(); }
    bool populated() const {
        for (Index m = 0; m < n_task(); ++m) {
            if (acc_seen[m] < 0.0) return false;
            for (Index n = 0; n <= m; ++n)
                if (acc(n, m) < 0.0) return false;
        }
        return true;
    }
};

struct ForgettingMetrics {
    double alpha_overall = 0.0;
    double alpha_memory = 0.0;
    double alpha_new = 0.0;
    bool overall_defined = true;  // false when acc(1,1) = 0
};

inline ForgettingMetrics forgetting_metrics(const TaskAccuracyMatrix& mat) {
    const Index n_task = mat.n_task();
    require(n_task >= 2, "forgetting_metrics: need at least two tasks");
    require(mat.populated(), "forgetting_metrics: accuracy matrix not fully populated");
    ForgettingMetrics out;
    const double base = mat.acc(0, 0);
    if (base <= 0.0) {
        out.overall_defined = false;
    } else {
        double sum = 0.0;
        for (Index n = 1; n < n_task; ++n) sum += mat.acc_seen[n] / base;
        out.alpha_overall = sum / static_cast<double>(n_task - 1);
    }
    double mem = 0.0, novel = 0.0;
    for (Index n = 0; n < n_task; ++n) {
        mem += mat.acc(n, n_task - 1) - mat.acc(n, n);
        novel += mat.acc(n, n);
    }
    out.alpha_memory = mem / static_cast<double>(n_task);
    out.alpha_new = novel / static_cast<double>(n_task);
    return out;
}

struct AblationDeltas {
    double d_alpha_memory = 0.0;
    double d_alpha_new = 0.0;
};

/// Differences between a fully trained model and an initialisation-only
/// model (thresholds frozen after P_n init). Both runs must share the
/// protocol; the caller guarantees shared seeds and data order.
inline AblationDeltas ablation_deltas(const ForgettingMetrics& full,
                                      const ForgettingMetrics& init_only) {
    return {full.alpha_memory - init_only.alpha_memory, full.alpha_new - init_only.alpha_new};
}

/// Exact binomial coefficient; throws on uint64 overflow.
inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    if (k > n - k) k = n - k;
    unsigned __int128 acc = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        acc = acc * (n - k + i) / i;
        if (acc > static_cast<unsigned __int128>(UINT64_MAX))
            throw NumericError("binomial: overflow");
    }
    return static_cast<std::uint64_t>(acc);
}

/// argmax over p in `grid` of C(N, round(p*N)); exact integer comparison.
/// Grid points aliasing to the same k (small N) tie-break toward the p that
/// represents its k exactly.
inline double binomial_argmax_p(std::uint64_t n, const std::vector<double>& grid) {
    require(!grid.empty(), "binomial_argmax_p: empty grid");
    double best_p = grid.front();
    std::uint64_t best = 0;
    double best_alias = 2.0;
    for (double p : grid) {
        const auto k = static_cast<std::uint64_t>(std::llround(p * static_cast<double>(n)));
        const std::uint64_t c = binomial(n, k);
        const double alias = std::abs(p * static_cast<double>(n) - static_cast<double>(k));
        if (c > best || (c == best && alias < best_alias)) {
            best = c;
            best_p = p;
            best_alias = alias;
        }
    }
    return best_p;
}

}  // namespace sparce
