#pragma once

#include <string>
#include <vector>

namespace thermalnet {

/// k x k count matrix: entry (i,j) = samples of true class i predicted as j.
/// Predictions of -1 ("no matching class") count toward support and accuracy
/// but land in no column.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(size_t k);

    void add(int truth, int pred);
    size_t k() const { return k_; }
    uint64_t at(size_t i, size_t j) const { return counts_[i * k_ + j]; }
    uint64_t row_sum(size_t i) const;
    uint64_t col_sum(size_t j) const;
    /// Samples of true class i, including ones with out-of-space predictions.
    uint64_t support(size_t i) const { return row_sum(i) + misses_[i]; }
    uint64_t total() const { return total_; }
    uint64_t trace() const;

private:
    size_t k_;
    std::vector<uint64_t> counts_;
    std::vector<uint64_t> misses_;
    uint64_t total_ = 0;
};

ConfusionMatrix confusion_matrix(const std::vector<int>& preds, const std::vector<int>& labels, size_t k);

struct ClassMetrics {
    std::string name;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    uint64_t support = 0;
};

/// Per-class precision/recall/F1/support plus macro aggregates and accuracy.
/// F1 is always the harmonic mean 2PR/(P+R) (0 when P+R == 0).
struct MetricsReport {
    std::vector<ClassMetrics> per_class;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    double accuracy = 0.0;
    uint64_t total_support = 0;
};

MetricsReport metrics_from_confusion(const ConfusionMatrix& cm, const std::vector<std::string>& class_names);

/// Aligned text table; the aggregate block uses the row labels
/// Precision / Recall / F1 Score / Support / Test Accuracy.
std::string format_metrics(const MetricsReport& report);

std::string metrics_to_json(const MetricsReport& report);

} // namespace thermalnet
