#pragma once

#include <cstdint>
#include <set>
#include <vector>

#include "sparce/reservoir.hpp"
#include "sparce/rng.hpp"
#include "sparce/types.hpp"

namespace sparce {

/// Ensemble of stimulus vectors the sequences draw from. The default bank
/// substitutes the proprietary projection-neuron recordings with synthetic
/// nonnegative vectors (|N(0,1)| entries, L2-normalised); any E x N_in
/// nonnegative matrix can be dropped in instead.
template <class Scalar>
struct StimulusBank {
    Matrix<Scalar> stimuli;  // E x N_in

    Index size() const { return stimuli.rows(); }
    Index n_in() const { return stimuli.cols(); }
};

template <class Scalar = double>
StimulusBank<Scalar> make_stimulus_bank(Index n_elements, Index n_in, std::uint64_t seed) {
    require(n_elements >= 1 && n_in >= 1, "make_stimulus_bank: bad dimensions");
    StimulusBank<Scalar> bank;
    bank.stimuli.resize(n_elements, n_in);
    auto engine = make_engine(derive_seed(seed, "stimulus.bank"));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index e = 0; e < n_elements; ++e) {
        for (Index j = 0; j < n_in; ++j)
            bank.stimuli(e, j) = static_cast<Scalar>(std::abs(normal(engine)));
        bank.stimuli.row(e).normalize();
    }
    return bank;
}

/// A sequence-to-class association: element indices per temporal slot.
struct SequenceItem {
    std::vector<Index> elements;  // n_t element indices into the bank
    int label = 0;
    bool is_base = false;
    Index round = 0;
    Index substituted_slot = -1;  // -1 for base successions
};

struct SequenceDataset {
    std::vector<SequenceItem> items;
    int n_class = 2;
    Index n_t = 3;
    Index bank_size = 0;
};

struct AuditReport {
    bool passed = false;
    Index conflicting_pairs = 0;     // identical tuples with different classes
    Index repeated_tuples = 0;       // identical tuples, same class (informational)
    Index correlated_pairs = 0;      // shared-context pairs (n_t-1 common slots) sharing a class
    Index uncovered_base_slots = 0;  // base slots without an anti-correlated partner
    std::string message;
};

namespace detail {

inline Index slots_differing(const SequenceItem& a, const SequenceItem& b) {
    Index d = 0;
    for (std::size_t t = 0; t < a.elements.size(); ++t)
        if (a.elements[t] != b.elements[t]) ++d;
    return d;
}

}  // namespace detail

/// Exact construction audit. The building procedure guarantees, and this
/// verifies over every pair in the dataset:
///  - the same element tuple never carries two different classes (for
///    n_t = 1 this is "the same element never appears in two classes");
///  - any two sequences sharing all slots but one (so sharing context;
///    applies for n_t >= 2) belong to different classes — similarity cannot
///    inform classification;
///  - every base succession has, at every slot, at least one partner
///    differing only there and carrying a different class.
inline AuditReport audit_sequences(const SequenceDataset& ds) {
    AuditReport report;
    const auto n = ds.items.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& a = ds.items[i];
        std::vector<bool> covered(static_cast<std::size_t>(ds.n_t), false);
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const auto& b = ds.items[j];
            const Index diff = detail::slots_differing(a, b);
            if (diff == 0 && j > i) {
                if (a.label != b.label)
                    ++report.conflicting_pairs;
                else
                    ++report.repeated_tuples;
            }
            if (diff == 1) {
                if (a.label == b.label) {
                    if (ds.n_t >= 2 && j > i) ++report.correlated_pairs;
                } else {
                    for (Index t = 0; t < ds.n_t; ++t)
                        if (a.elements[std::size_t(t)] != b.elements[std::size_t(t)])
                            covered[std::size_t(t)] = true;
                }
            }
        }
        if (a.is_base)
            for (Index t = 0; t < ds.n_t; ++t)
                if (!covered[std::size_t(t)]) ++report.uncovered_base_slots;
    }
    report.passed = report.conflicting_pairs == 0 && report.correlated_pairs == 0 &&
                    report.uncovered_base_slots == 0;
    report.message = report.passed ? "audit passed"
                                   : "audit failed: " + std::to_string(report.conflicting_pairs) +
                                         " class conflicts, " +
                                         std::to_string(report.correlated_pairs) +
                                         " correlated pairs, " +
                                         std::to_string(report.uncovered_base_slots) +
                                         " uncovered base slots";
    return report;
}

/// Builds the sequence-storage dataset by rounds. Each round: (1) draw
/// n_t * n_class elements with repetition and compose one base succession
/// per class; (2) draw n_t * n_class fresh elements (no repetition, disjoint
/// from the round's base elements) and substitute them slot by slot from the
/// last slot backwards, rotating the class assignment so shared context maps
/// to a different class. Rounds violating the anti-correlation property
/// against previously accepted sequences are redrawn. Stops once every
/// class holds at least n_per_class sequences; the result always passes
/// audit_sequences by construction.
inline SequenceDataset build_sequences(Index bank_size, int n_class, Index n_per_class,
                                       Index n_t, std::uint64_t seed) {
    require(bank_size >= 1, "build_sequences: empty bank");
    require(n_class >= 2, "build_sequences: need at least two classes");
    require(n_per_class >= 1 && n_t >= 1, "build_sequences: bad counts");
    const Index per_round = n_t * static_cast<Index>(n_class);
    require(bank_size >= 2 * per_round,
            "build_sequences: bank too small for a round of fresh draws");

    SequenceDataset ds;
    ds.n_class = n_class;
    ds.n_t = n_t;
    ds.bank_size = bank_size;

    auto engine = make_engine(derive_seed(seed, "storage.sequences"));
    std::uniform_int_distribution<Index> pick(0, bank_size - 1);

    auto violates = [&](const std::vector<SequenceItem>& round_items) {
        // within the round and against all accepted items
        const bool context = n_t >= 2;
        for (std::size_t i = 0; i < round_items.size(); ++i) {
            for (std::size_t j = i + 1; j < round_items.size(); ++j) {
                const Index d = detail::slots_differing(round_items[i], round_items[j]);
                if (d == 0) return true;
                if (context && d == 1 && round_items[i].label == round_items[j].label) return true;
            }
            for (const auto& old : ds.items) {
                const Index d = detail::slots_differing(round_items[i], old);
                if (d == 0) return true;
                if (context && d == 1 && round_items[i].label == old.label) return true;
            }
        }
        return false;
    };

    Index per_class_count = 0;
    Index round = 0;
    while (per_class_count < n_per_class) {
        bool accepted = false;
        for (int attempt = 0; attempt < 1000 && !accepted; ++attempt) {
            // step 1: base successions, elements drawn with repetition
            std::vector<SequenceItem> candidate;
            std::set<Index> used;
            for (int c = 0; c < n_class; ++c) {
                SequenceItem item;
                item.is_base = true;
                item.round = round;
                item.label = c;
                for (Index t = 0; t < n_t; ++t) {
                    const Index e = pick(engine);
                    item.elements.push_back(e);
                    used.insert(e);
                }
                candidate.push_back(std::move(item));
            }
            // step 2: fresh elements, no repetition and disjoint from base
            std::vector<Index> fresh;
            int guard = 0;
            while (static_cast<Index>(fresh.size()) < per_round) {
                const Index e = pick(engine);
                if (used.insert(e).second) fresh.push_back(e);
                if (++guard > 100000)
                    throw NumericError("build_sequences: insufficient bank size for fresh draws");
            }
            // substitute from the last temporal slot backwards
            std::size_t fresh_at = 0;
            for (Index t = n_t - 1; t >= 0; --t) {
                for (int c = 0; c < n_class; ++c) {
                    SequenceItem item = candidate[std::size_t(c)];
                    item.is_base = false;
                    item.substituted_slot = t;
                    item.elements[std::size_t(t)] = fresh[fresh_at++];
                    item.label = (c + 1) % n_class;
                    candidate.push_back(std::move(item));
                }
            }
            if (!violates(candidate)) {
                for (auto& item : candidate) ds.items.push_back(std::move(item));
                accepted = true;
            }
        }
        if (!accepted)
            throw NumericError(
                "build_sequences: could not draw an anti-correlated round; bank too small");
        ++round;
        per_class_count += n_t + 1;
    }
    return ds;
}

/// Renders one sequence item into a T x N_in signal: each element is held
/// for `element_steps` steps with fresh multiplicative white noise
/// S_i(t) = s_i(t) (1 + sigma_s xi_i(t)) per dimension per step.
template <class Scalar>
Matrix<Scalar> render_sequence(const StimulusBank<Scalar>& bank, const SequenceItem& item,
                               Index element_steps, double sigma_s, std::uint64_t seed) {
    require(element_steps >= 1, "render_sequence: element_steps must be >= 1");
    const Index n_in = bank.n_in();
    const Index t_total = static_cast<Index>(item.elements.size()) * element_steps;
    Matrix<Scalar> signal(t_total, n_in);
    auto engine = make_engine(derive_seed(seed, "storage.noise"));
    std::normal_distribution<double> xi(0.0, 1.0);
    Index row = 0;
    for (Index element : item.elements) {
        require(element >= 0 && element < bank.size(), "render_sequence: element out of range");
        for (Index k = 0; k < element_steps; ++k, ++row) {
            if (sigma_s > 0.0) {
                for (Index j = 0; j < n_in; ++j)
                    signal(row, j) = bank.stimuli(element, j) *
                                     static_cast<Scalar>(1.0 + sigma_s * xi(engine));
            } else {
                signal.row(row) = bank.stimuli.row(element);
            }
        }
    }
    return signal;
}

}  // namespace sparce
