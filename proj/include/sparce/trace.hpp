#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sparce/types.hpp"

namespace sparce {

/// One persisted metrics row. `step` is the global minibatch counter;
/// `split` is train/validation/test.
struct TraceRow {
    long step = 0;
    std::string split = "train";
    double loss = 0.0;
    double accuracy = 0.0;
    double rmse = 0.0;
    double sparsity = 0.0;
    double mean_dtheta1 = 0.0;
    double mean_dtheta2 = 0.0;
    double mean_sp = 0.0;
};

/// Persisted per-minibatch results. CSV schema v1 (column set and order are
/// frozen; tests assert them):
///   step,split,loss,accuracy,rmse,sparsity,mean_dtheta1,mean_dtheta2,mean_sp
/// preceded by `# key=value` metadata lines (config_hash, seed, git).
struct MetricTrace {
    static constexpr const char* kCsvHeader =
        "step,split,loss,accuracy,rmse,sparsity,mean_dtheta1,mean_dtheta2,mean_sp";

    std::vector<TraceRow> rows;
    std::string config_hash;
    std::string seed;
    std::string git_revision;

    void append(TraceRow row) {
        require(rows.empty() || row.step >= rows.back().step,
                "MetricTrace: steps must be non-decreasing");
        rows.push_back(std::move(row));
    }

    std::string to_csv() const {
        std::ostringstream os;
        os << "# sparce-trace v1\n";
        if (!config_hash.empty()) os << "# config_hash=" << config_hash << "\n";
        if (!seed.empty()) os << "# seed=" << seed << "\n";
        if (!git_revision.empty()) os << "# git=" << git_revision << "\n";
        os << kCsvHeader << "\n";
        char buf[256];
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof(buf), "%ld,%s,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                          r.step, r.split.c_str(), r.loss, r.accuracy, r.rmse, r.sparsity,
                          r.mean_dtheta1, r.mean_dtheta2, r.mean_sp);
            os << buf;
        }
        return os.str();
    }

    void save_csv(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("MetricTrace: cannot open " + path);
        out << to_csv();
    }

    const TraceRow* last_of(const std::string& split) const {
        for (auto it = rows.rbegin(); it != rows.rend(); ++it)
            if (it->split == split) return &*it;
        return nullptr;
    }

    /// First eval step (given split) whose accuracy reaches `threshold`;
    /// -1 when never reached.
    long first_step_at_accuracy(const std::string& split, double threshold) const {
        for (const auto& r : rows)
            if (r.split == split && r.accuracy >= threshold) return r.step;
        return -1;
    }
};

}  // namespace sparce
