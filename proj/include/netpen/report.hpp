#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "netpen/error.hpp"
#include "netpen/labels.hpp"
#include "netpen/metrics.hpp"

namespace netpen {

/// Everything `evaluate` produces for one detector on one dataset.
struct EvaluationReport {
    std::string detector_id;
    std::string dataset_id;
    double iou_match = 0.5;
    double confidence_threshold = 0.3;
    std::string ap_interpolation = "all-point";
    ClassTable classes;
    MeanAveragePrecision map;
    OperatingPoint op;
    CurveBundle curves;
};

struct ReportRow {
    std::string detector;
    double map = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Fixed-layout metrics table: detector name column plus mAP, Precision,
/// Recall and F1 score at four decimal places.
inline std::string render_table(const std::vector<ReportRow>& rows) {
    size_t name_w = 8;  // len("Detector")
    for (const auto& r : rows) name_w = std::max(name_w, r.detector.size());
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-*s  %6s  %9s  %6s  %8s\n", static_cast<int>(name_w),
                  "Detector", "mAP", "Precision", "Recall", "F1 score");
    std::string out = buf;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-*s  %6.4f  %9.4f  %6.4f  %8.4f\n",
                      static_cast<int>(name_w), r.detector.c_str(), r.map, r.precision, r.recall,
                      r.f1);
        out += buf;
    }
    return out;
}

inline std::string render_report(const EvaluationReport& report) {
    return render_table({{report.detector_id, report.map.value, report.op.micro.precision,
                          report.op.micro.recall, report.op.micro.f1}});
}

namespace detail {

inline nlohmann::ordered_json prf_to_json(const Prf& p) {
    return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1},
            {"tp", p.tp},               {"fp", p.fp},         {"fn", p.fn}};
}

inline Prf prf_from_json(const nlohmann::json& j) {
    Prf p;
    p.precision = j.at("precision").get<double>();
    p.recall = j.at("recall").get<double>();
    p.f1 = j.at("f1").get<double>();
    p.tp = j.at("tp").get<long long>();
    p.fp = j.at("fp").get<long long>();
    p.fn = j.at("fn").get<long long>();
    return p;
}

inline nlohmann::ordered_json curve_to_json(const CurveSeries& s) {
    nlohmann::ordered_json j;
    for (const auto& [name, points] : s.by_class) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& p : points) arr.push_back({p.confidence, p.value});
        j[name] = std::move(arr);
    }
    return j;
}

inline CurveSeries curve_from_json(const nlohmann::json& j, CurveMetric metric) {
    CurveSeries s;
    s.metric = metric;
    for (auto it = j.begin(); it != j.end(); ++it) {
        std::vector<CurvePoint> points;
        for (const auto& p : it.value()) {
            points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        }
        s.by_class[it.key()] = std::move(points);
    }
    return s;
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const EvaluationReport& r) {
    nlohmann::ordered_json j;
    j["detector"] = r.detector_id;
    j["dataset"] = r.dataset_id;
    j["iou_match"] = r.iou_match;
    j["confidence_threshold"] = r.confidence_threshold;
    j["ap_interpolation"] = r.ap_interpolation;
    j["classes"] = nlohmann::ordered_json::array();
    for (const auto& c : r.classes.classes()) j["classes"].push_back({{"id", c.id}, {"name", c.name}});
    j["map"] = r.map.value;
    j["per_class_ap"] = nlohmann::ordered_json::object();
    for (const auto& [cls, ap] : r.map.per_class) {
        const auto& name = r.classes.name(cls);
        if (ap) {
            j["per_class_ap"][name] = *ap;
        } else {
            j["per_class_ap"][name] = nullptr;
        }
    }
    j["undefined_classes"] = r.map.undefined_classes;
    j["operating_point"] = {{"micro", detail::prf_to_json(r.op.micro)},
                            {"macro", detail::prf_to_json(r.op.macro)}};
    j["operating_point"]["per_class"] = nlohmann::ordered_json::object();
    for (const auto& [cls, prf] : r.op.per_class) {
        j["operating_point"]["per_class"][r.classes.name(cls)] = detail::prf_to_json(prf);
    }
    if (std::isnan(r.curves.saturation_confidence)) {
        j["precision_saturation_confidence"] = nullptr;
    } else {
        j["precision_saturation_confidence"] = r.curves.saturation_confidence;
    }
    j["curves"] = {{"samples", r.curves.samples},
                   {"precision", detail::curve_to_json(r.curves.precision)},
                   {"recall", detail::curve_to_json(r.curves.recall)},
                   {"f1", detail::curve_to_json(r.curves.f1)}};
    return j;
}

inline EvaluationReport report_from_json(const nlohmann::json& j) {
    try {
        EvaluationReport r;
        r.detector_id = j.at("detector").get<std::string>();
        r.dataset_id = j.at("dataset").get<std::string>();
        r.iou_match = j.at("iou_match").get<double>();
        r.confidence_threshold = j.at("confidence_threshold").get<double>();
        r.ap_interpolation = j.at("ap_interpolation").get<std::string>();
        std::vector<ClassId> classes;
        for (const auto& c : j.at("classes")) {
            classes.push_back({c.at("id").get<int>(), c.at("name").get<std::string>()});
        }
        r.classes = ClassTable(std::move(classes));
        r.map.value = j.at("map").get<double>();
        for (const auto& c : r.classes.classes()) {
            const auto& ap = j.at("per_class_ap").at(c.name);
            if (ap.is_null()) {
                r.map.per_class[c.id] = std::nullopt;
            } else {
                r.map.per_class[c.id] = ap.get<double>();
            }
        }
        r.map.undefined_classes = j.at("undefined_classes").get<std::vector<int>>();
        r.op.confidence_threshold = r.confidence_threshold;
        r.op.micro = detail::prf_from_json(j.at("operating_point").at("micro"));
        r.op.macro = detail::prf_from_json(j.at("operating_point").at("macro"));
        for (const auto& c : r.classes.classes()) {
            r.op.per_class[c.id] =
                detail::prf_from_json(j.at("operating_point").at("per_class").at(c.name));
        }
        const auto& sat = j.at("precision_saturation_confidence");
        r.curves.saturation_confidence =
            sat.is_null() ? std::numeric_limits<double>::quiet_NaN() : sat.get<double>();
        r.curves.samples = j.at("curves").at("samples").get<std::vector<double>>();
        r.curves.precision = detail::curve_from_json(j.at("curves").at("precision"), CurveMetric::Precision);
        r.curves.recall = detail::curve_from_json(j.at("curves").at("recall"), CurveMetric::Recall);
        r.curves.f1 = detail::curve_from_json(j.at("curves").at("f1"), CurveMetric::F1);
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCategory::Data, std::string("malformed report JSON: ") + e.what());
    }
}

inline EvaluationReport load_report(const std::filesystem::path& path) {
    try {
        return report_from_json(nlohmann::json::parse(read_text_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCategory::Data, "report is not valid JSON: " + std::string(e.what()));
    }
}

inline void save_report(const EvaluationReport& r, const std::filesystem::path& path) {
    write_text_file(path, to_json(r).dump(2) + "\n");
}

namespace detail {

inline std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

/// Curve CSV: header `confidence,class,metric,value`, doubles at full
/// round-trip precision.
inline void write_curve_csv(const CurveSeries& series, const std::filesystem::path& path) {
    std::string out = "confidence,class,metric,value\n";
    for (const auto& [name, points] : series.by_class) {
        for (const auto& p : points) {
            out += detail::format_g17(p.confidence);
            out += ',';
            out += name;
            out += ',';
            out += metric_name(series.metric);
            out += ',';
            out += detail::format_g17(p.value);
            out += '\n';
        }
    }
    write_text_file(path, out);
}

inline CurveSeries read_curve_csv(const std::filesystem::path& path) {
    const auto text = read_text_file(path);
    CurveSeries series;
    bool metric_set = false;
    size_t pos = 0;
    int line_no = 0;
    while (pos < text.size()) {
        size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string_view line(text.data() + pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line != "confidence,class,metric,value") {
                throw Error(ErrorCategory::Data, "curve CSV: unexpected header");
            }
            continue;
        }
        std::array<std::string_view, 4> fields;
        size_t start = 0;
        for (int f = 0; f < 4; ++f) {
            const size_t comma = f < 3 ? line.find(',', start) : line.size();
            if (comma == std::string_view::npos) {
                throw Error(ErrorCategory::Data,
                            "curve CSV: expected 4 fields at line " + std::to_string(line_no));
            }
            fields[static_cast<size_t>(f)] = line.substr(start, comma - start);
            start = comma + 1;
        }
        double confidence = 0.0, value = 0.0;
        if (!detail::parse_real(fields[0], confidence) || !detail::parse_real(fields[3], value)) {
            throw Error(ErrorCategory::Data,
                        "curve CSV: bad numeric field at line " + std::to_string(line_no));
        }
        CurveMetric metric;
        if (fields[2] == "precision") {
            metric = CurveMetric::Precision;
        } else if (fields[2] == "recall") {
            metric = CurveMetric::Recall;
        } else if (fields[2] == "f1") {
            metric = CurveMetric::F1;
        } else {
            throw Error(ErrorCategory::Data,
                        "curve CSV: unknown metric at line " + std::to_string(line_no));
        }
        if (!metric_set) {
            series.metric = metric;
            metric_set = true;
        } else if (metric != series.metric) {
            throw Error(ErrorCategory::Data, "curve CSV: mixed metrics in one file");
        }
        series.by_class[std::string(fields[1])].push_back({confidence, value});
    }
    return series;
}

/// Predictions interchange: JSON lines, one detection per line, so external
/// detectors can be evaluated without the inference module.
inline void write_predictions(const std::map<std::string, std::vector<Detection>>& preds,
                              const std::filesystem::path& path) {
    std::string out;
    for (const auto& [image_id, dets] : preds) {
        for (const auto& d : dets) {
            nlohmann::ordered_json j{{"image_id", image_id},
                                     {"class_id", d.class_id},
                                     {"confidence", d.confidence},
                                     {"box", {d.box.x1(), d.box.y1(), d.box.x2(), d.box.y2()}}};
            out += j.dump();
            out += '\n';
        }
    }
    write_text_file(path, out);
}

inline std::map<std::string, std::vector<Detection>> read_predictions(
    const std::filesystem::path& path, const ClassTable* classes = nullptr) {
    std::map<std::string, std::vector<Detection>> preds;
    const auto text = read_text_file(path);
    size_t pos = 0;
    int line_no = 0;
    while (pos < text.size()) {
        size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string_view line(text.data() + pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (detail::trim(line).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            Detection d;
            d.class_id = j.at("class_id").get<int>();
            d.confidence = j.at("confidence").get<double>();
            const auto& box = j.at("box");
            if (box.size() != 4) {
                throw Error(ErrorCategory::Data,
                            "predictions line " + std::to_string(line_no) + ": box needs 4 values");
            }
            d.box = BoundingBox::pixel_corner(box.at(0).get<double>(), box.at(1).get<double>(),
                                              box.at(2).get<double>(), box.at(3).get<double>());
            if (classes && !classes->contains(d.class_id)) {
                throw Error(ErrorCategory::Data, "predictions line " + std::to_string(line_no) +
                                                     ": unknown class id " +
                                                     std::to_string(d.class_id));
            }
            preds[j.at("image_id").get<std::string>()].push_back(std::move(d));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCategory::Data, "predictions line " + std::to_string(line_no) +
                                                 " is not valid JSON: " + e.what());
        }
    }
    return preds;
}

}  // namespace netpen
