#include <algorithm>
#include <iomanip>
#include <sstream>

#include "wseg/metrics.hpp"

namespace wseg {

ConfusionCounts confusion_counts(const BinaryMask& pred, const BinaryMask& gt) {
    if (pred.width != gt.width || pred.height != gt.height) {
        throw ArgumentError("confusion_counts: mask dims differ, " + std::to_string(pred.width) +
                            "x" + std::to_string(pred.height) + " vs " +
                            std::to_string(gt.width) + "x" + std::to_string(gt.height));
    }
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.pixels.size(); ++i) {
        const bool p = pred.pixels[i] != 0;
        const bool g = gt.pixels[i] != 0;
        if (p && g) {
            ++c.tp;
        } else if (p) {
            ++c.fp;
        } else if (g) {
            ++c.fn;
        } else {
            ++c.tn;
        }
    }
    return c;
}

double precision(const ConfusionCounts& c) {
    if (c.tp + c.fp == 0) return c.fn == 0 ? 1.0 : 0.0;
    return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
}

double recall(const ConfusionCounts& c) {
    if (c.tp + c.fn == 0) return c.fp == 0 ? 1.0 : 0.0;
    return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

double dice(const ConfusionCounts& c) {
    if (c.tp + c.fp + c.fn == 0) return 1.0;
    return 2.0 * static_cast<double>(c.tp) /
           static_cast<double>(2 * c.tp + c.fp + c.fn);
}

EvalReport evaluate_dataset(std::vector<EvalPair> pairs) {
    if (pairs.empty()) throw ArgumentError("evaluate_dataset: no mask pairs given");
    std::sort(pairs.begin(), pairs.end(),
              [](const EvalPair& a, const EvalPair& b) { return a.id < b.id; });

    EvalReport report;
    report.per_image.reserve(pairs.size());
    double sum_p = 0.0, sum_r = 0.0, sum_d = 0.0;
    for (const auto& pair : pairs) {
        ImageEval e;
        e.id = pair.id;
        e.counts = confusion_counts(pair.pred, pair.gt);
        e.precision = precision(e.counts);
        e.recall = recall(e.counts);
        e.dice = dice(e.counts);
        sum_p += e.precision;
        sum_r += e.recall;
        sum_d += e.dice;
        report.pooled += e.counts;
        report.per_image.push_back(std::move(e));
    }
    const double n = static_cast<double>(report.per_image.size());
    report.mean_precision = sum_p / n;
    report.mean_recall = sum_r / n;
    report.mean_dice = sum_d / n;
    report.pooled_precision = precision(report.pooled);
    report.pooled_recall = recall(report.pooled);
    report.pooled_dice = dice(report.pooled);
    return report;
}

std::string report_csv(const EvalReport& report) {
    std::ostringstream os;
    os << std::setprecision(6) << std::fixed;
    os << "id,tp,fp,fn,tn,precision,recall,dice\n";
    for (const auto& e : report.per_image) {
        os << e.id << "," << e.counts.tp << "," << e.counts.fp << "," << e.counts.fn << ","
           << e.counts.tn << "," << e.precision << "," << e.recall << "," << e.dice << "\n";
    }
    os << "mean,,,,," << report.mean_precision << "," << report.mean_recall << ","
       << report.mean_dice << "\n";
    os << "pooled," << report.pooled.tp << "," << report.pooled.fp << "," << report.pooled.fn
       << "," << report.pooled.tn << "," << report.pooled_precision << ","
       << report.pooled_recall << "," << report.pooled_dice << "\n";
    return os.str();
}

std::string report_table(const EvalReport& report) {
    std::ostringstream os;
    os << std::setprecision(2) << std::fixed;
    os << "Metric     Mean-of-images   Pooled-counts\n";
    os << "Precision  " << std::setw(13) << report.mean_precision * 100.0 << "%  " << std::setw(13)
       << report.pooled_precision * 100.0 << "%\n";
    os << "Recall     " << std::setw(13) << report.mean_recall * 100.0 << "%  " << std::setw(13)
       << report.pooled_recall * 100.0 << "%\n";
    os << "Dice       " << std::setw(13) << report.mean_dice * 100.0 << "%  " << std::setw(13)
       << report.pooled_dice * 100.0 << "%\n";
    os << "(" << report.per_image.size() << " images)\n";
    return os.str();
}

}  // namespace wseg
