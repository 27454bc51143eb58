#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "netpen/decode.hpp"
#include "netpen/error.hpp"
#include "netpen/geometry.hpp"
#include "netpen/labels.hpp"

namespace netpen {

/// One annotated object in pixel space, ready for matching.
struct GroundTruthBox {
    int class_id = 0;
    BoundingBox box;  // PixelCorner
};

/// Ground truth converted to pixel space using each entry's image dimensions.
inline std::map<std::string, std::vector<GroundTruthBox>> pixel_ground_truth(
    const DatasetManifest& manifest,
    const std::map<std::string, std::vector<GroundTruthRecord>>& records) {
    std::map<std::string, std::vector<GroundTruthBox>> out;
    for (const auto& e : manifest.entries) {
        auto& boxes = out[e.image_id];
        auto it = records.find(e.image_id);
        if (it == records.end()) continue;
        for (const auto& r : it->second) {
            boxes.push_back({r.class_id, to_pixel(r.box, {e.width, e.height})});
        }
    }
    return out;
}

struct DetectionOutcome {
    std::string image_id;
    int detection_index = 0;  // index within the image's detection list
    int class_id = 0;
    double confidence = 0.0;
    std::optional<int> matched_gt;  // index into the image's ground-truth list
    double iou = 0.0;
};

struct MatchResult {
    double iou_threshold = 0.5;
    std::map<std::string, std::vector<DetectionOutcome>> per_image;
    std::map<int, long long> gt_count_per_class;

    long long total_ground_truth() const {
        long long n = 0;
        for (const auto& [cls, count] : gt_count_per_class) n += count;
        return n;
    }
};

/// Greedy detection-to-ground-truth matching, per image and per class:
/// detections in descending-confidence order each take the unmatched
/// same-class ground truth of highest IoU when that IoU >= iou_match.
/// Every image in `preds` must exist in `gts` (the manifest universe).
inline MatchResult match_detections(
    const std::map<std::string, std::vector<Detection>>& preds,
    const std::map<std::string, std::vector<GroundTruthBox>>& gts, double iou_match) {
    MatchResult result;
    result.iou_threshold = iou_match;
    for (const auto& [image_id, boxes] : gts) {
        for (const auto& g : boxes) result.gt_count_per_class[g.class_id] += 1;
        result.per_image[image_id];  // every image participates, even without detections
    }
    for (const auto& [image_id, dets] : preds) {
        const auto git = gts.find(image_id);
        if (git == gts.end()) {
            throw Error(ErrorCategory::Data,
                        "unknown image in predictions: '" + image_id + "' is not in the manifest");
        }
        const auto& gt = git->second;

        std::vector<int> order(dets.size());
        for (size_t i = 0; i < dets.size(); ++i) order[i] = static_cast<int>(i);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (dets[a].confidence != dets[b].confidence) {
                return dets[a].confidence > dets[b].confidence;
            }
            return a < b;
        });

        std::vector<bool> taken(gt.size(), false);
        auto& outcomes = result.per_image[image_id];
        for (int idx : order) {
            const auto& d = dets[static_cast<size_t>(idx)];
            int best = -1;
            double best_iou = 0.0;
            for (size_t g = 0; g < gt.size(); ++g) {
                if (taken[g] || gt[g].class_id != d.class_id) continue;
                const double v = iou(d.box, gt[g].box);
                if (v > best_iou) {
                    best_iou = v;
                    best = static_cast<int>(g);
                }
            }
            DetectionOutcome outcome{image_id, idx, d.class_id, d.confidence, std::nullopt, best_iou};
            if (best >= 0 && best_iou >= iou_match) {
                taken[static_cast<size_t>(best)] = true;
                outcome.matched_gt = best;
            }
            outcomes.push_back(std::move(outcome));
        }
    }
    return result;
}

/// All outcomes pooled and ranked for AP/curve computation:
/// confidence descending, ties by image id then detection index.
inline std::vector<DetectionOutcome> ranked_outcomes(const MatchResult& match,
                                                     std::optional<int> class_filter = std::nullopt) {
    std::vector<DetectionOutcome> out;
    for (const auto& [image_id, outcomes] : match.per_image) {
        for (const auto& o : outcomes) {
            if (!class_filter || o.class_id == *class_filter) out.push_back(o);
        }
    }
    std::sort(out.begin(), out.end(), [](const DetectionOutcome& a, const DetectionOutcome& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        if (a.image_id != b.image_id) return a.image_id < b.image_id;
        return a.detection_index < b.detection_index;
    });
    return out;
}

/// All-point interpolated average precision for one class: area under the
/// precision envelope over the ranked detection list. Undefined (nullopt)
/// when the class has no ground-truth instances.
inline std::optional<double> average_precision(const MatchResult& match, int class_id) {
    const auto it = match.gt_count_per_class.find(class_id);
    const long long npos = it == match.gt_count_per_class.end() ? 0 : it->second;
    if (npos <= 0) return std::nullopt;

    const auto ranked = ranked_outcomes(match, class_id);
    if (ranked.empty()) return 0.0;

    std::vector<double> precision(ranked.size());
    std::vector<double> recall(ranked.size());
    long long tp = 0;
    for (size_t i = 0; i < ranked.size(); ++i) {
        if (ranked[i].matched_gt) ++tp;
        precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
        recall[i] = static_cast<double>(tp) / static_cast<double>(npos);
    }
    // Envelope from the right: max precision at recall >= r.
    for (size_t i = ranked.size() - 1; i-- > 0;) {
        precision[i] = std::max(precision[i], precision[i + 1]);
    }
    double ap = 0.0;
    double prev_recall = 0.0;
    for (size_t i = 0; i < ranked.size(); ++i) {
        if (recall[i] > prev_recall) {
            ap += (recall[i] - prev_recall) * precision[i];
            prev_recall = recall[i];
        }
    }
    return ap;
}

struct MeanAveragePrecision {
    double value = 0.0;
    std::map<int, std::optional<double>> per_class;
    std::vector<int> undefined_classes;  // classes with zero ground truth, excluded
};

/// Unweighted mean of the defined per-class APs over the given class table.
inline MeanAveragePrecision mean_average_precision(const MatchResult& match,
                                                   const ClassTable& classes) {
    MeanAveragePrecision out;
    double sum = 0.0;
    int defined = 0;
    for (const auto& c : classes.classes()) {
        auto ap = average_precision(match, c.id);
        out.per_class[c.id] = ap;
        if (ap) {
            sum += *ap;
            ++defined;
        } else {
            out.undefined_classes.push_back(c.id);
        }
    }
    out.value = defined > 0 ? sum / defined : 0.0;
    return out;
}

struct Prf {
    double precision = 1.0;
    double recall = 0.0;
    double f1 = 0.0;
    long long tp = 0;
    long long fp = 0;
    long long fn = 0;
};

namespace detail {

inline Prf make_prf(long long tp, long long fp, long long fn) {
    Prf p;
    p.tp = tp;
    p.fp = fp;
    p.fn = fn;
    // Zero detections: vacuous precision 1.0 so the curve stays defined at high tau.
    p.precision = (tp + fp) == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    p.recall = (tp + fn) == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    p.f1 = (p.precision + p.recall) == 0.0 ? 0.0
                                           : 2.0 * p.precision * p.recall / (p.precision + p.recall);
    return p;
}

}  // namespace detail

struct OperatingPoint {
    double confidence_threshold = 0.0;
    std::map<int, Prf> per_class;
    Prf micro;  // pooled counts across classes (headline)
    Prf macro;  // unweighted mean over classes with ground truth
};

/// Counts TP/FP/FN among detections with confidence >= tau. Ground truths
/// whose only match falls below tau count as missed.
inline OperatingPoint operating_point(const MatchResult& match, const ClassTable& classes,
                                      double tau) {
    OperatingPoint op;
    op.confidence_threshold = tau;
    std::map<int, long long> tp, det;
    for (const auto& [image_id, outcomes] : match.per_image) {
        for (const auto& o : outcomes) {
            if (o.confidence < tau) continue;
            det[o.class_id] += 1;
            if (o.matched_gt) tp[o.class_id] += 1;
        }
    }
    long long tp_all = 0, fp_all = 0, fn_all = 0;
    double p_sum = 0.0, r_sum = 0.0, f_sum = 0.0;
    int with_gt = 0;
    for (const auto& c : classes.classes()) {
        const long long class_tp = tp.count(c.id) ? tp[c.id] : 0;
        const long long class_det = det.count(c.id) ? det[c.id] : 0;
        const long long npos = match.gt_count_per_class.count(c.id)
                                   ? match.gt_count_per_class.at(c.id)
                                   : 0;
        const auto prf = detail::make_prf(class_tp, class_det - class_tp, npos - class_tp);
        op.per_class[c.id] = prf;
        tp_all += prf.tp;
        fp_all += prf.fp;
        fn_all += prf.fn;
        if (npos > 0) {
            p_sum += prf.precision;
            r_sum += prf.recall;
            f_sum += prf.f1;
            ++with_gt;
        }
    }
    op.micro = detail::make_prf(tp_all, fp_all, fn_all);
    if (with_gt > 0) {
        op.macro.precision = p_sum / with_gt;
        op.macro.recall = r_sum / with_gt;
        op.macro.f1 = f_sum / with_gt;
        op.macro.tp = tp_all;
        op.macro.fp = fp_all;
        op.macro.fn = fn_all;
    }
    return op;
}

enum class CurveMetric { Precision, Recall, F1 };

inline const char* metric_name(CurveMetric m) {
    switch (m) {
        case CurveMetric::Precision: return "precision";
        case CurveMetric::Recall: return "recall";
        case CurveMetric::F1: return "f1";
    }
    return "?";
}

struct CurvePoint {
    double confidence = 0.0;
    double value = 0.0;

    bool operator==(const CurvePoint&) const = default;
};

/// One metric swept over confidence, per class plus the "all" micro series.
struct CurveSeries {
    CurveMetric metric = CurveMetric::Precision;
    std::map<std::string, std::vector<CurvePoint>> by_class;

    bool operator==(const CurveSeries&) const = default;
};

struct CurveBundle {
    std::vector<double> samples;  // strictly increasing tau grid
    CurveSeries precision{CurveMetric::Precision, {}};
    CurveSeries recall{CurveMetric::Recall, {}};
    CurveSeries f1{CurveMetric::F1, {}};
    // Minimal swept confidence from which aggregate precision stays at 1.0;
    // NaN when precision never saturates.
    double saturation_confidence = std::numeric_limits<double>::quiet_NaN();
};

/// Sweep tau over a uniform [0,1] grid of `samples` points merged with every
/// distinct detection confidence (exact breakpoints).
inline CurveBundle confidence_curves(const MatchResult& match, const ClassTable& classes,
                                     int samples = 101) {
    if (samples < 2) {
        throw Error(ErrorCategory::Usage, "confidence curve needs at least 2 samples");
    }
    CurveBundle bundle;
    std::set<double> taus;
    for (int i = 0; i < samples; ++i) {
        taus.insert(static_cast<double>(i) / static_cast<double>(samples - 1));
    }
    const auto ranked = ranked_outcomes(match);
    for (const auto& o : ranked) taus.insert(o.confidence);
    bundle.samples.assign(taus.begin(), taus.end());

    struct Counter {
        long long tp = 0, det = 0, npos = 0;
    };
    std::map<int, Counter> per_class;
    for (const auto& c : classes.classes()) {
        per_class[c.id].npos =
            match.gt_count_per_class.count(c.id) ? match.gt_count_per_class.at(c.id) : 0;
    }
    Counter all;
    all.npos = match.total_ground_truth();

    const size_t n_taus = bundle.samples.size();
    std::map<std::string, std::vector<CurvePoint>> p_series, r_series, f_series;
    auto series_slot = [&](std::map<std::string, std::vector<CurvePoint>>& m, const std::string& key)
        -> std::vector<CurvePoint>& {
        auto& v = m[key];
        if (v.empty()) v.resize(n_taus);
        return v;
    };

    // Descending sweep: extend the included set as tau falls past each
    // confidence (inclusive threshold), then record values.
    size_t next = 0;  // ranked is confidence-descending
    for (size_t ti = n_taus; ti-- > 0;) {
        const double tau = bundle.samples[ti];
        while (next < ranked.size() && ranked[next].confidence >= tau) {
            auto& c = per_class[ranked[next].class_id];
            c.det += 1;
            all.det += 1;
            if (ranked[next].matched_gt) {
                c.tp += 1;
                all.tp += 1;
            }
            ++next;
        }
        auto record = [&](const std::string& key, const Counter& c) {
            const auto prf = detail::make_prf(c.tp, c.det - c.tp, c.npos - c.tp);
            series_slot(p_series, key)[ti] = {tau, prf.precision};
            series_slot(r_series, key)[ti] = {tau, prf.recall};
            series_slot(f_series, key)[ti] = {tau, prf.f1};
        };
        record("all", all);
        for (const auto& c : classes.classes()) record(c.name, per_class[c.id]);
    }
    bundle.precision.by_class = std::move(p_series);
    bundle.recall.by_class = std::move(r_series);
    bundle.f1.by_class = std::move(f_series);

    const auto& agg = bundle.precision.by_class.at("all");
    for (size_t ti = n_taus; ti-- > 0;) {
        if (agg[ti].value == 1.0) {
            bundle.saturation_confidence = agg[ti].confidence;
        } else {
            break;
        }
    }
    return bundle;
}

}  // namespace netpen
