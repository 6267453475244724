#include "thermalnet/metrics.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace thermalnet {

ConfusionMatrix::ConfusionMatrix(size_t k) : k_(k), counts_(k * k, 0), misses_(k, 0) {
    if (k == 0) throw std::invalid_argument("confusion matrix needs k >= 1");
}

void ConfusionMatrix::add(int truth, int pred) {
    if (truth < 0 || static_cast<size_t>(truth) >= k_) throw std::out_of_range("confusion: true label out of range");
    if (pred >= static_cast<int>(k_)) throw std::out_of_range("confusion: prediction out of range");
    ++total_;
    if (pred >= 0) {
        ++counts_[static_cast<size_t>(truth) * k_ + static_cast<size_t>(pred)];
    } else {
        ++misses_[static_cast<size_t>(truth)];
    }
}

uint64_t ConfusionMatrix::row_sum(size_t i) const {
    uint64_t s = 0;
    for (size_t j = 0; j < k_; ++j) s += counts_[i * k_ + j];
    return s;
}

uint64_t ConfusionMatrix::col_sum(size_t j) const {
    uint64_t s = 0;
    for (size_t i = 0; i < k_; ++i) s += counts_[i * k_ + j];
    return s;
}

uint64_t ConfusionMatrix::trace() const {
    uint64_t s = 0;
    for (size_t i = 0; i < k_; ++i) s += counts_[i * k_ + i];
    return s;
}

ConfusionMatrix confusion_matrix(const std::vector<int>& preds, const std::vector<int>& labels, size_t k) {
    if (preds.size() != labels.size()) throw std::invalid_argument("confusion: size mismatch");
    ConfusionMatrix cm(k);
    for (size_t i = 0; i < preds.size(); ++i) cm.add(labels[i], preds[i]);
    return cm;
}

MetricsReport metrics_from_confusion(const ConfusionMatrix& cm, const std::vector<std::string>& class_names) {
    if (class_names.size() != cm.k()) throw std::invalid_argument("metrics: class name count mismatch");
    MetricsReport report;
    for (size_t c = 0; c < cm.k(); ++c) {
        ClassMetrics m;
        m.name = class_names[c];
        m.support = cm.support(c);
        const uint64_t tp = cm.at(c, c);
        const uint64_t predicted = cm.col_sum(c);
        m.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
        m.recall = m.support ? static_cast<double>(tp) / static_cast<double>(m.support) : 0.0;
        const double pr = m.precision + m.recall;
        m.f1 = pr > 0.0 ? 2.0 * m.precision * m.recall / pr : 0.0;
        report.per_class.push_back(m);
        report.macro_precision += m.precision;
        report.macro_recall += m.recall;
        report.macro_f1 += m.f1;
    }
    report.macro_precision /= static_cast<double>(cm.k());
    report.macro_recall /= static_cast<double>(cm.k());
    report.macro_f1 /= static_cast<double>(cm.k());
    report.total_support = cm.total();
    report.accuracy = cm.total() ? static_cast<double>(cm.trace()) / static_cast<double>(cm.total()) : 0.0;
    return report;
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

} // namespace

std::string format_metrics(const MetricsReport& report) {
    std::ostringstream out;
    auto row = [&out](const std::string& a, const std::string& b, const std::string& c,
                      const std::string& d, const std::string& e) {
        const std::string cols[5] = {a, b, c, d, e};
        const size_t widths[5] = {20, 12, 12, 12, 10};
        for (int i = 0; i < 5; ++i) {
            out << cols[i];
            for (size_t p = cols[i].size(); p < widths[i]; ++p) out << ' ';
        }
        out << "\n";
    };
    row("Class", "Precision", "Recall", "F1 Score", "Support");
    for (const ClassMetrics& m : report.per_class) {
        row(m.name, fmt(m.precision), fmt(m.recall), fmt(m.f1), std::to_string(m.support));
    }
    out << "\n";
    auto agg = [&out](const std::string& label, const std::string& value) {
        out << label;
        for (size_t p = label.size(); p < 16; ++p) out << ' ';
        out << value << "\n";
    };
    agg("Precision", fmt(report.macro_precision));
    agg("Recall", fmt(report.macro_recall));
    agg("F1 Score", fmt(report.macro_f1));
    agg("Support", std::to_string(report.total_support));
    char acc[32];
    std::snprintf(acc, sizeof(acc), "%.2f%%", report.accuracy * 100.0);
    agg("Test Accuracy", acc);
    return out.str();
}

std::string metrics_to_json(const MetricsReport& report) {
    nlohmann::json j;
    j["per_class"] = nlohmann::json::array();
    for (const ClassMetrics& m : report.per_class) {
        j["per_class"].push_back({{"class", m.name},
                                  {"precision", m.precision},
                                  {"recall", m.recall},
                                  {"f1_score", m.f1},
                                  {"support", m.support}});
    }
    j["precision"] = report.macro_precision;
    j["recall"] = report.macro_recall;
    j["f1_score"] = report.macro_f1;
    j["support"] = report.total_support;
    j["test_accuracy"] = report.accuracy;
    return j.dump(2);
}

} // namespace thermalnet
