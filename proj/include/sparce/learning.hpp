#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "sparce/metrics.hpp"
#include "sparce/readout.hpp"
#include "sparce/rng.hpp"
#include "sparce/types.hpp"

namespace sparce {

enum class LossKind { mse, sigmoid_cross_entropy };

/// Loss configuration. Targets are one-hot with value beta for the correct
/// class. l1/l2 are the baseline regularizers on W_o only; SpaRCe runs keep
/// both at zero.
struct LossSpec {
    LossKind kind = LossKind::mse;
    double beta = 1.0;
    double l1 = 0.0;
    double l2 = 0.0;
};

template <class Scalar>
Vector<Scalar> one_hot(Index n_class, Index cls, Scalar beta = Scalar(1)) {
    require(cls >= 0 && cls < n_class, "one_hot: class out of range");
    Vector<Scalar> t = Vector<Scalar>::Zero(n_class);
    t[cls] = beta;
    return t;
}

/// Loss value and dE/dy. MSE: E = 1/2 sum (t - y)^2, grad = y - t.
/// Sigmoid cross entropy uses the numerically stable log-sum form;
/// grad_j = sigmoid(y_j) - t_j.
template <class Scalar, class DerivedY, class DerivedT>
Scalar loss_and_output_grad(const Eigen::MatrixBase<DerivedY>& y,
                            const Eigen::MatrixBase<DerivedT>& target, const LossSpec& spec,
                            Vector<Scalar>& grad) {
    require(y.size() == target.size(), "loss_and_output_grad: dimension mismatch");
    if (spec.kind == LossKind::mse) {
        grad = y.derived() - target.derived();
        return Scalar(0.5) * grad.squaredNorm();
    }
    grad.resize(y.size());
    Scalar loss = 0;
    for (Index j = 0; j < y.size(); ++j) {
        const Scalar z = y[j], t = target[j];
        loss += (Scalar(1) - t) * z + std::max(-z, Scalar(0)) +
                std::log1p(std::exp(-std::abs(z)));
        grad[j] = Scalar(1) / (Scalar(1) + std::exp(-z)) - t;
    }
    return loss;
}

/// Regularizer term added to the loss when l1/l2 are active (the section-3.1
/// baseline variants); kept separate so finite-difference checks can include
/// it.
template <class Derived>
typename Derived::Scalar regularization_loss(const Eigen::MatrixBase<Derived>& w_out,
                                             const LossSpec& spec) {
    using Scalar = typename Derived::Scalar;
    Scalar r = 0;
    if (spec.l1 > 0.0) r += Scalar(spec.l1) * w_out.template lpNorm<1>();
    if (spec.l2 > 0.0) r += Scalar(0.5 * spec.l2) * w_out.squaredNorm();
    return r;
}

/// dE/dW_o = x (dE/dy)^T, plus the active regularizer terms.
template <class Scalar>
Matrix<Scalar> grad_weights(const Vector<Scalar>& x, const Vector<Scalar>& dedy,
                            const Matrix<Scalar>& w_out, const LossSpec& spec) {
    require(x.size() == w_out.rows() && dedy.size() == w_out.cols(),
            "grad_weights: shape mismatch");
    Matrix<Scalar> g = x * dedy.transpose();
    if (spec.l1 > 0.0) g += Scalar(spec.l1) * w_out.array().sign().matrix();
    if (spec.l2 > 0.0) g += Scalar(spec.l2) * w_out;
    return g;
}

/// Threshold gradient and its two-force decomposition. The gradient is
/// dE/dtheta_k = -sum_j (dE/dy_j) W_kj sign(x_k); silent nodes (x_k = 0)
/// receive no update. Forces are reported in units of the raw descent step
/// (-dE/dtheta), so eta_theta * (force1 + force2) is the SGD step. For MSE
/// one-hot targets the split is exact: force1_k = sum_j y_j W_kj sign(x_k)
/// raises thresholds of correlated nodes, force2_k = -beta W_k,correct
/// sign(x_k) lowers thresholds of nodes backing the correct class. For
/// cross entropy, force2 follows the first-order expansion of the sigmoid
/// and force1 is the residual (decomposition flagged approximate).
template <class Scalar>
struct ThresholdGrad {
    Vector<Scalar> grad;    // dE/dtheta_adapt
    Vector<Scalar> force1;  // correlation force
    Vector<Scalar> force2;  // correct-class force
    bool decomposition_exact = true;
};

template <class Scalar>
ThresholdGrad<Scalar> grad_thresholds(const Vector<Scalar>& x, const Matrix<Scalar>& w_out,
                                      const Vector<Scalar>& dedy, const Vector<Scalar>& y,
                                      Index correct_class, const LossSpec& spec) {
    require(x.size() == w_out.rows() && dedy.size() == w_out.cols(),
            "grad_thresholds: shape mismatch");
    require(correct_class >= 0 && correct_class < w_out.cols(),
            "grad_thresholds: class out of range");
    ThresholdGrad<Scalar> out;
    const auto sgn = x.array().sign();
    out.grad = (-(w_out * dedy).array() * sgn).matrix();
    if (spec.kind == LossKind::mse) {
        out.force1 = ((w_out * y).array() * sgn).matrix();
        out.force2 = (Scalar(-spec.beta) * w_out.col(correct_class).array() * sgn).matrix();
        out.decomposition_exact = true;
    } else {
        const Vector<Scalar> row_sum = w_out.rowwise().sum();
        out.force2 =
            ((Scalar(0.5) * row_sum - w_out.col(correct_class)).array() * sgn).matrix();
        out.force1 = -out.grad - out.force2;
        out.decomposition_exact = false;
    }
    return out;
}

enum class OptimizerKind { sgd, adam };

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

namespace detail {

template <class Derived, class OtherDerived>
void adam_update(Eigen::MatrixBase<Derived>& param, const Eigen::MatrixBase<OtherDerived>& grad,
                 Matrix<typename Derived::Scalar>& m, Matrix<typename Derived::Scalar>& v,
                 double eta, long t, const AdamParams& ap) {
    using S = typename Derived::Scalar;
    if (m.rows() != param.rows() || m.cols() != param.cols()) {
        m = Matrix<S>::Zero(param.rows(), param.cols());
        v = Matrix<S>::Zero(param.rows(), param.cols());
    }
    m = S(ap.beta1) * m + S(1.0 - ap.beta1) * grad;
    v = S(ap.beta2) * v + S(1.0 - ap.beta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(ap.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(ap.beta2, static_cast<double>(t));
    param.derived() -= (S(eta / bc1) * m.array() /
                        ((v.array() / S(bc2)).sqrt() + S(ap.eps)))
                           .matrix();
}

}  // namespace detail

/// Optimizer state: two parameter groups (W_o and theta_adapt), each with
/// its own learning rate and Adam moments, sharing one step counter.
/// eta_theta = 0 disables threshold learning (the initialisation-only
/// ablation).
template <class Scalar>
struct TrainState {
    double eta_w = 1e-3;
    double eta_theta = 1e-4;
    OptimizerKind optimizer = OptimizerKind::sgd;
    AdamParams adam;
    Index minibatch_size = 20;
    long step_counter = 0;

    Matrix<Scalar> m_w, v_w;          // Adam moments for w_out
    Matrix<Scalar> m_theta, v_theta;  // Adam moments for theta_adapt
};

template <class Scalar>
void apply_update(SparseReadout<Scalar>& ro, TrainState<Scalar>& ts,
                  const Matrix<Scalar>& grad_w, const Vector<Scalar>& grad_theta) {
    ++ts.step_counter;
    if (ts.optimizer == OptimizerKind::sgd) {
        ro.w_out -= Scalar(ts.eta_w) * grad_w;
        if (ts.eta_theta > 0.0) ro.theta_adapt -= Scalar(ts.eta_theta) * grad_theta;
        return;
    }
    detail::adam_update(ro.w_out, grad_w, ts.m_w, ts.v_w, ts.eta_w, ts.step_counter, ts.adam);
    if (ts.eta_theta > 0.0)
        detail::adam_update(ro.theta_adapt, grad_theta, ts.m_theta, ts.v_theta, ts.eta_theta,
                            ts.step_counter, ts.adam);
}

/// Per-minibatch record of the two threshold forces: population means per
/// minibatch plus cumulative per-node sums of the batch-averaged forces.
template <class Scalar>
struct ForceTrace {
    std::vector<double> mean1, mean2;
    Vector<Scalar> cum1, cum2;

    void record(const Vector<Scalar>& f1, const Vector<Scalar>& f2) {
        if (cum1.size() == 0) {
            cum1 = Vector<Scalar>::Zero(f1.size());
            cum2 = Vector<Scalar>::Zero(f2.size());
        }
        cum1 += f1;
        cum2 += f2;
        mean1.push_back(f1.template cast<double>().mean());
        mean2.push_back(f2.template cast<double>().mean());
    }

    /// Population mean of the cumulative total force (force1 + force2);
    /// positive means thresholds rose on average.
    double cumulative_mean_total() const {
        if (cum1.size() == 0) return 0.0;
        return (cum1 + cum2).template cast<double>().mean();
    }
};

struct MinibatchMetrics {
    double loss = 0.0;
    double accuracy = 0.0;
    double rmse = 0.0;
    double sparsity = 0.0;
    double mean_force1 = 0.0;
    double mean_force2 = 0.0;
    double mean_specialization = 0.0;
};

/// One optimizer step on a minibatch of assembled readout vectors (rows of
/// `batch`). Gradients are averaged over the batch; W_o and theta_adapt are
/// both updated from the pre-update parameters. Throws NumericError on
/// non-finite gradients (learning-rate blowup).
template <class Scalar, class Derived>
MinibatchMetrics train_minibatch(const Eigen::MatrixBase<Derived>& batch,
                                 const std::vector<int>& labels, SparseReadout<Scalar>& ro,
                                 TrainState<Scalar>& ts, const LossSpec& spec,
                                 ForceTrace<Scalar>* forces = nullptr) {
    const Index b = batch.rows();
    require(b >= 1, "train_minibatch: empty batch");
    require(b == static_cast<Index>(labels.size()), "train_minibatch: labels size mismatch");
    require(batch.cols() == ro.dim(), "train_minibatch: dimension mismatch");

    const Index d = ro.dim(), c = ro.n_class();
    Matrix<Scalar> grad_w = Matrix<Scalar>::Zero(d, c);
    Vector<Scalar> grad_theta = Vector<Scalar>::Zero(d);
    Vector<Scalar> f1 = Vector<Scalar>::Zero(d), f2 = Vector<Scalar>::Zero(d);
    Vector<Scalar> x(d), y(c), dedy(c);
    ActivationCounts counts(d, c);

    MinibatchMetrics mm;
    Index hits = 0;
    std::int64_t active = 0;
    double sq_err = 0.0;
    const Scalar inv_b = Scalar(1) / Scalar(b);
    for (Index r = 0; r < b; ++r) {
        const int cls = labels[static_cast<std::size_t>(r)];
        require(cls >= 0 && cls < c, "train_minibatch: label out of range");
        const Vector<Scalar> v = batch.row(r).transpose();
        forward(v, ro, x, y);
        const Vector<Scalar> target = one_hot<Scalar>(c, cls, Scalar(spec.beta));
        mm.loss += loss_and_output_grad<Scalar>(y, target, spec, dedy) / static_cast<double>(b);
        grad_w.noalias() += inv_b * (x * dedy.transpose());
        auto tg = grad_thresholds<Scalar>(x, ro.w_out, dedy, y, cls, spec);
        grad_theta += inv_b * tg.grad;
        f1 += inv_b * tg.force1;
        f2 += inv_b * tg.force2;
        if (argmax_class(y) == cls) ++hits;
        active += (x.array() != Scalar(0)).count();
        sq_err += (y - target).squaredNorm();
        counts.accumulate(x, cls);
    }
    if (spec.l1 > 0.0) grad_w += Scalar(spec.l1) * ro.w_out.array().sign().matrix();
    if (spec.l2 > 0.0) grad_w += Scalar(spec.l2) * ro.w_out;
    mm.loss += static_cast<double>(regularization_loss(ro.w_out, spec));

    if (!grad_w.allFinite() || !grad_theta.allFinite())
        throw NumericError("train_minibatch: non-finite gradient (learning-rate blowup?)");

    apply_update(ro, ts, grad_w, grad_theta);

    mm.accuracy = static_cast<double>(hits) / static_cast<double>(b);
    mm.rmse = std::sqrt(sq_err / static_cast<double>(b * c));
    mm.sparsity = static_cast<double>(active) / static_cast<double>(b * d);
    mm.mean_force1 = f1.template cast<double>().mean();
    mm.mean_force2 = f2.template cast<double>().mean();
    mm.mean_specialization = specialization(counts, /*allow_missing_classes=*/true).mean;
    if (forces) forces->record(f1, f2);
    return mm;
}

/// Evaluates loss/accuracy/rmse/sparsity (no update) over a bank of readout
/// rows; also fills per-class activation counts when given.
template <class Scalar, class Derived>
MinibatchMetrics evaluate(const Eigen::MatrixBase<Derived>& bank, const std::vector<int>& labels,
                          const SparseReadout<Scalar>& ro, const LossSpec& spec,
                          ActivationCounts* counts_out = nullptr) {
    const Index m = bank.rows();
    require(m >= 1 && m == static_cast<Index>(labels.size()), "evaluate: bad batch");
    const Index c = ro.n_class();
    Vector<Scalar> x(ro.dim()), y(c), dedy(c);
    MinibatchMetrics mm;
    Index hits = 0;
    std::int64_t active = 0;
    double sq_err = 0.0;
    for (Index r = 0; r < m; ++r) {
        const int cls = labels[static_cast<std::size_t>(r)];
        const Vector<Scalar> v = bank.row(r).transpose();
        forward(v, ro, x, y);
        const Vector<Scalar> target = one_hot<Scalar>(c, cls, Scalar(spec.beta));
        mm.loss += loss_and_output_grad<Scalar>(y, target, spec, dedy) / static_cast<double>(m);
        if (argmax_class(y) == cls) ++hits;
        active += (x.array() != Scalar(0)).count();
        sq_err += (y - target).squaredNorm();
        if (counts_out) counts_out->accumulate(x, cls);
    }
    mm.loss += static_cast<double>(regularization_loss(ro.w_out, spec));
    mm.accuracy = static_cast<double>(hits) / static_cast<double>(m);
    mm.rmse = std::sqrt(sq_err / static_cast<double>(m * c));
    mm.sparsity = static_cast<double>(active) / static_cast<double>(m * ro.dim());
    return mm;
}

/// Two-layer readout baseline: D -> n_hidden (tanh) -> n_class, trained by
/// backprop with the same optimizers.
template <class Scalar>
struct HiddenLayer {
    Matrix<Scalar> w1;  // D x H
    Vector<Scalar> b1;  // H
    Matrix<Scalar> w2;  // H x C
    Vector<Scalar> b2;  // C

    Index dim() const { return w1.rows(); }
    Index n_hidden() const { return w1.cols(); }
    Index n_class() const { return w2.cols(); }

    long parameter_count() const {
        return n_hidden() * (dim() + n_class() + 1) + n_class();
    }

    Vector<Scalar> hidden(const Vector<Scalar>& v) const {
        return ((w1.transpose() * v + b1).array().tanh()).matrix();
    }
    Vector<Scalar> output(const Vector<Scalar>& h) const { return w2.transpose() * h + b2; }
};

template <class Scalar = double>
HiddenLayer<Scalar> make_hidden_layer(Index dim, Index n_hidden, Index n_class,
                                      std::uint64_t seed) {
    require(n_hidden >= 1, "make_hidden_layer: n_hidden must be >= 1");
    HiddenLayer<Scalar> hl;
    auto engine = make_engine(derive_seed(seed, "hidden_layer"));
    const double s1 = 1.0 / std::sqrt(static_cast<double>(dim));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(n_hidden));
    std::uniform_real_distribution<double> u1(-s1, s1), u2(-s2, s2);
    hl.w1.resize(dim, n_hidden);
    for (Index j = 0; j < n_hidden; ++j)
        for (Index i = 0; i < dim; ++i) hl.w1(i, j) = static_cast<Scalar>(u1(engine));
    hl.w2.resize(n_hidden, n_class);
    for (Index j = 0; j < n_class; ++j)
        for (Index i = 0; i < n_hidden; ++i) hl.w2(i, j) = static_cast<Scalar>(u2(engine));
    hl.b1 = Vector<Scalar>::Zero(n_hidden);
    hl.b2 = Vector<Scalar>::Zero(n_class);
    return hl;
}

template <class Scalar>
struct HiddenTrainState {
    double eta = 1e-3;
    OptimizerKind optimizer = OptimizerKind::sgd;
    AdamParams adam;
    long step_counter = 0;
    Matrix<Scalar> m_w1, v_w1, m_b1, v_b1, m_w2, v_w2, m_b2, v_b2;
};

template <class Scalar, class Derived>
MinibatchMetrics train_minibatch_hidden(const Eigen::MatrixBase<Derived>& batch,
                                        const std::vector<int>& labels, HiddenLayer<Scalar>& hl,
                                        HiddenTrainState<Scalar>& ts, const LossSpec& spec) {
    const Index b = batch.rows();
    require(b >= 1 && b == static_cast<Index>(labels.size()), "train_minibatch_hidden: bad batch");
    const Index d = hl.dim(), h = hl.n_hidden(), c = hl.n_class();
    Matrix<Scalar> g_w1 = Matrix<Scalar>::Zero(d, h), g_w2 = Matrix<Scalar>::Zero(h, c);
    Vector<Scalar> g_b1 = Vector<Scalar>::Zero(h), g_b2 = Vector<Scalar>::Zero(c);
    Vector<Scalar> dedy(c);
    MinibatchMetrics mm;
    Index hits = 0;
    double sq_err = 0.0;
    const Scalar inv_b = Scalar(1) / Scalar(b);
    for (Index r = 0; r < b; ++r) {
        const int cls = labels[static_cast<std::size_t>(r)];
        const Vector<Scalar> v = batch.row(r).transpose();
        const Vector<Scalar> hid = hl.hidden(v);
        const Vector<Scalar> y = hl.output(hid);
        const Vector<Scalar> target = one_hot<Scalar>(c, cls, Scalar(spec.beta));
        mm.loss += loss_and_output_grad<Scalar>(y, target, spec, dedy) / static_cast<double>(b);
        g_w2.noalias() += inv_b * (hid * dedy.transpose());
        g_b2 += inv_b * dedy;
        const Vector<Scalar> delta1 =
            ((hl.w2 * dedy).array() * (Scalar(1) - hid.array().square())).matrix();
        g_w1.noalias() += inv_b * (v * delta1.transpose());
        g_b1 += inv_b * delta1;
        if (argmax_class(y) == cls) ++hits;
        sq_err += (y - target).squaredNorm();
    }
    if (!g_w1.allFinite() || !g_w2.allFinite())
        throw NumericError("train_minibatch_hidden: non-finite gradient");
    ++ts.step_counter;
    if (ts.optimizer == OptimizerKind::sgd) {
        hl.w1 -= Scalar(ts.eta) * g_w1;
        hl.b1 -= Scalar(ts.eta) * g_b1;
        hl.w2 -= Scalar(ts.eta) * g_w2;
        hl.b2 -= Scalar(ts.eta) * g_b2;
    } else {
        detail::adam_update(hl.w1, g_w1, ts.m_w1, ts.v_w1, ts.eta, ts.step_counter, ts.adam);
        Matrix<Scalar> b1m = hl.b1, b2m = hl.b2;
        detail::adam_update(b1m, g_b1, ts.m_b1, ts.v_b1, ts.eta, ts.step_counter, ts.adam);
        detail::adam_update(b2m, g_b2, ts.m_b2, ts.v_b2, ts.eta, ts.step_counter, ts.adam);
        detail::adam_update(hl.w2, g_w2, ts.m_w2, ts.v_w2, ts.eta, ts.step_counter, ts.adam);
        hl.b1 = b1m.col(0);
        hl.b2 = b2m.col(0);
    }
    mm.accuracy = static_cast<double>(hits) / static_cast<double>(b);
    mm.rmse = std::sqrt(sq_err / static_cast<double>(b * c));
    mm.sparsity = 1.0;
    return mm;
}

template <class Scalar, class Derived>
MinibatchMetrics evaluate_hidden(const Eigen::MatrixBase<Derived>& bank,
                                 const std::vector<int>& labels, const HiddenLayer<Scalar>& hl,
                                 const LossSpec& spec) {
    const Index m = bank.rows();
    require(m >= 1 && m == static_cast<Index>(labels.size()), "evaluate_hidden: bad batch");
    Vector<Scalar> dedy(hl.n_class());
    MinibatchMetrics mm;
    Index hits = 0;
    double sq_err = 0.0;
    for (Index r = 0; r < m; ++r) {
        const int cls = labels[static_cast<std::size_t>(r)];
        const Vector<Scalar> v = bank.row(r).transpose();
        const Vector<Scalar> y = hl.output(hl.hidden(v));
        const Vector<Scalar> target = one_hot<Scalar>(hl.n_class(), cls, Scalar(spec.beta));
        mm.loss += loss_and_output_grad<Scalar>(y, target, spec, dedy) / static_cast<double>(m);
        if (argmax_class(y) == cls) ++hits;
        sq_err += (y - target).squaredNorm();
    }
    mm.accuracy = static_cast<double>(hits) / static_cast<double>(m);
    mm.rmse = std::sqrt(sq_err / static_cast<double>(m * hl.n_class()));
    mm.sparsity = 1.0;
    return mm;
}

}  // namespace sparce
