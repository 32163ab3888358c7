#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sparce/learning.hpp"
#include "sparce/trace.hpp"

namespace sparce {

/// Budget and cadence of a training run. `epochs` may be fractional
/// ("approximately two epochs"); when both epochs and max_minibatches are
/// set, the smaller budget wins. stop_at_accuracy > 0 stops once the eval
/// split reaches that accuracy on `stop_patience` consecutive checkpoints.
struct TrainLoopConfig {
    Index minibatch = 20;
    double epochs = 0.0;
    long max_minibatches = 0;
    Index eval_every = 0;  // 0: evaluate only at start and end
    std::uint64_t shuffle_seed = 0;
    double stop_at_accuracy = -1.0;
    int stop_patience = 1;
    bool record_forces = true;
    bool trace_train_rows = true;

    long budget(Index n_samples) const {
        long total = 0;
        if (epochs > 0.0)
            total = static_cast<long>(std::llround(
                std::ceil(epochs * static_cast<double>(n_samples) /
                          static_cast<double>(minibatch))));
        if (max_minibatches > 0)
            total = total > 0 ? std::min(total, max_minibatches) : max_minibatches;
        return total;
    }
};

struct TrainResult {
    MetricTrace trace;
    long steps_run = 0;
    long solved_at_step = -1;  // first eval step meeting stop_at_accuracy
    MinibatchMetrics final_eval;
};

/// Shuffled-epoch minibatch training over a sample source.
///
/// Source contract:
///   Index size() const;
///   Index dim() const;
///   void fetch(const std::vector<Index>& ids, Matrix<Scalar>& rows,
///              std::vector<int>& labels);
/// fetch may synthesize rows on demand (noisy re-rendering) or copy from a
/// precomputed bank.
///
/// EvalFn contract: MinibatchMetrics(long step, MetricTrace&) — evaluates
/// the current model, optionally appending extra split rows (validation,
/// test); the loop appends the returned metrics as an "eval" row and uses
/// them for early stopping.
template <class Scalar, class Source, class EvalFn>
TrainResult train_loop(Source& source, SparseReadout<Scalar>& ro, TrainState<Scalar>& ts,
                       const LossSpec& spec, const TrainLoopConfig& cfg, EvalFn&& eval_fn,
                       ForceTrace<Scalar>* forces = nullptr) {
    const Index m = source.size();
    require(m >= 1, "train_loop: empty source");
    const long total = cfg.budget(m);

    TrainResult result;
    auto run_eval = [&](long step) {
        const MinibatchMetrics ev = eval_fn(step, result.trace);
        TraceRow row{step,        "eval",        ev.loss,
                     ev.accuracy, ev.rmse,       ev.sparsity,
                     0.0,         0.0,           ev.mean_specialization};
        result.trace.append(row);
        result.final_eval = ev;
        return ev;
    };

    int streak = 0;
    {
        const auto ev = run_eval(0);
        if (cfg.stop_at_accuracy > 0.0 && ev.accuracy >= cfg.stop_at_accuracy) {
            if (++streak >= cfg.stop_patience) {
                result.solved_at_step = 0;
                return result;
            }
        }
    }

    std::vector<Index> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), Index(0));
    Matrix<Scalar> rows;
    std::vector<int> labels;
    std::vector<Index> ids;

    long step = 0;
    long epoch = 0;
    std::size_t cursor = order.size();  // forces a shuffle on first use
    while (step < total) {
        if (cursor >= order.size()) {
            auto engine = make_engine(derive_seed(cfg.shuffle_seed, "train.shuffle",
                                                  static_cast<std::uint64_t>(epoch)));
            std::shuffle(order.begin(), order.end(), engine);
            cursor = 0;
            ++epoch;
        }
        const std::size_t take =
            std::min<std::size_t>(static_cast<std::size_t>(cfg.minibatch), order.size() - cursor);
        ids.assign(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                   order.begin() + static_cast<std::ptrdiff_t>(cursor + take));
        cursor += take;

        source.fetch(ids, rows, labels);
        const MinibatchMetrics mm = train_minibatch<Scalar>(rows, labels, ro, ts, spec, forces);
        ++step;
        if (cfg.trace_train_rows) {
            result.trace.append(TraceRow{step, "train", mm.loss, mm.accuracy, mm.rmse, mm.sparsity,
                                         mm.mean_force1, mm.mean_force2,
                                         mm.mean_specialization});
        }

        const bool at_cadence = cfg.eval_every > 0 && step % cfg.eval_every == 0;
        if (at_cadence || step == total) {
            const auto ev = run_eval(step);
            if (cfg.stop_at_accuracy > 0.0) {
                if (ev.accuracy >= cfg.stop_at_accuracy) {
                    if (result.solved_at_step < 0 && ++streak >= cfg.stop_patience) {
                        result.solved_at_step = step;
                        break;
                    }
                } else {
                    streak = 0;
                }
            }
        }
    }
    result.steps_run = step;
    return result;
}

/// In-memory source over a precomputed bank of readout rows.
template <class Scalar>
struct BankSource {
    const Matrix<Scalar>* bank = nullptr;  // M x D
    const std::vector<int>* labels = nullptr;

    Index size() const { return bank->rows(); }
    Index dim() const { return bank->cols(); }
    void fetch(const std::vector<Index>& ids, Matrix<Scalar>& rows, std::vector<int>& out) const {
        rows.resize(static_cast<Index>(ids.size()), bank->cols());
        out.resize(ids.size());
        for (std::size_t r = 0; r < ids.size(); ++r) {
            rows.row(static_cast<Index>(r)) = bank->row(ids[r]);
            out[r] = (*labels)[static_cast<std::size_t>(ids[r])];
        }
    }
};

}  // namespace sparce
