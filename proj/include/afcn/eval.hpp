#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "afcn/error.hpp"

namespace afcn {

class ConfusionMatrix {
  public:
    explicit ConfusionMatrix(std::size_t num_classes)
        : num_classes_(num_classes), counts_(num_classes * num_classes, 0) {
        if (num_classes == 0) throw ArgumentError("confusion matrix needs at least one class");
    }

    void add(std::size_t truth, std::size_t predicted) {
        if (truth >= num_classes_ || predicted >= num_classes_) {
            throw ArgumentError("confusion matrix label out of range");
        }
        ++counts_[truth * num_classes_ + predicted];
        ++total_;
    }

    std::size_t num_classes() const { return num_classes_; }
    std::size_t total() const { return total_; }
    std::size_t count(std::size_t truth, std::size_t predicted) const {
        return counts_[truth * num_classes_ + predicted];
    }
    std::size_t support(std::size_t truth) const {
        std::size_t s = 0;
        for (std::size_t p = 0; p < num_classes_; ++p) s += count(truth, p);
        return s;
    }
    std::size_t correct() const {
        std::size_t s = 0;
        for (std::size_t c = 0; c < num_classes_; ++c) s += count(c, c);
        return s;
    }

    std::optional<double> recall(std::size_t truth) const {
        std::size_t s = support(truth);
        if (s == 0) return std::nullopt;
        return static_cast<double>(count(truth, truth)) / static_cast<double>(s);
    }

    void merge(const ConfusionMatrix& other) {
        if (other.num_classes_ != num_classes_) {
            throw ArgumentError("cannot merge confusion matrices of different sizes");
        }
        for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
        total_ += other.total_;
    }

  private:
    std::size_t num_classes_;
    std::vector<std::size_t> counts_; // [truth * num_classes + predicted]
    std::size_t total_ = 0;
};

inline ConfusionMatrix confusion(const std::vector<std::size_t>& preds,
                                 const std::vector<std::size_t>& labels,
                                 std::size_t num_classes) {
    if (preds.size() != labels.size()) {
        throw ArgumentError("confusion: " + std::to_string(preds.size()) + " predictions vs " +
                            std::to_string(labels.size()) + " labels");
    }
    ConfusionMatrix cm(num_classes);
    for (std::size_t i = 0; i < preds.size(); ++i) cm.add(labels[i], preds[i]);
    return cm;
}

// Fraction of all samples classified correctly.
inline double weighted_accuracy(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw MetricError("weighted accuracy undefined on an empty sample set");
    return static_cast<double>(cm.correct()) / static_cast<double>(cm.total());
}

// Mean of per-class recalls over the classes that actually appear; classes with
// zero support are excluded rather than counted as zero.
inline double unweighted_accuracy(const ConfusionMatrix& cm) {
    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < cm.num_classes(); ++c) {
        if (auto r = cm.recall(c)) {
            sum += *r;
            ++present;
        }
    }
    if (present == 0) throw MetricError("unweighted accuracy undefined on an empty sample set");
    return sum / static_cast<double>(present);
}

struct FoldMetrics {
    std::size_t fold = 0;
    double wa = 0.0;
    double ua = 0.0;
    std::vector<std::optional<double>> per_class_recall;
};

inline FoldMetrics fold_metrics(std::size_t fold, const ConfusionMatrix& cm) {
    FoldMetrics m;
    m.fold = fold;
    m.wa = weighted_accuracy(cm);
    m.ua = unweighted_accuracy(cm);
    m.per_class_recall.reserve(cm.num_classes());
    for (std::size_t c = 0; c < cm.num_classes(); ++c) m.per_class_recall.push_back(cm.recall(c));
    return m;
}

} // namespace afcn
