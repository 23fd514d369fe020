#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wseg/image.hpp"

namespace wseg {

struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    std::uint64_t total() const { return tp + fp + fn + tn; }
    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
};

ConfusionCounts confusion_counts(const BinaryMask& pred, const BinaryMask& gt);

// tp/(tp+fp). Empty prediction scores 1.0 against an empty ground truth and
// 0.0 otherwise.
double precision(const ConfusionCounts& c);

// tp/(tp+fn), with the empty-set convention mirrored on the ground truth.
double recall(const ConfusionCounts& c);

// 2*tp/(2*tp+fp+fn); 1.0 when tp, fp and fn are all zero.
double dice(const ConfusionCounts& c);

struct ImageEval {
    std::string id;
    ConfusionCounts counts;
    double precision = 0.0;
    double recall = 0.0;
    double dice = 0.0;
};

struct EvalPair {
    std::string id;
    BinaryMask pred;
    BinaryMask gt;
};

// Per-image metrics plus the two dataset aggregations: arithmetic means of the
// per-image values and the same formulas recomputed on pooled counts.
struct EvalReport {
    std::vector<ImageEval> per_image;  // ordered by id
    double mean_precision = 0.0;
    double mean_recall = 0.0;
    double mean_dice = 0.0;
    ConfusionCounts pooled;
    double pooled_precision = 0.0;
    double pooled_recall = 0.0;
    double pooled_dice = 0.0;
};

EvalReport evaluate_dataset(std::vector<EvalPair> pairs);

std::string report_csv(const EvalReport& report);
std::string report_table(const EvalReport& report);

}  // namespace wseg
