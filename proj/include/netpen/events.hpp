#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "netpen/decode.hpp"
#include "netpen/error.hpp"
#include "netpen/labels.hpp"

namespace netpen {

/// Wire form of one detection: class name, confidence rounded to 4 decimals,
/// pixel-integer corner box.
struct EventDetection {
    std::string class_name;
    double confidence = 0.0;
    int64_t x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    bool operator==(const EventDetection&) const = default;
};

/// One frame's detection result as broadcast to clients and event logs.
/// Detections are sorted by descending confidence.
struct DetectionEvent {
    std::string source_id;
    int64_t frame_index = 0;
    int64_t timestamp_ms = 0;
    int64_t latency_ms = 0;
    std::string model;
    std::vector<EventDetection> detections;

    bool operator==(const DetectionEvent&) const = default;
};

inline DetectionEvent make_event(const std::string& source_id, int64_t frame_index,
                                 int64_t timestamp_ms, int64_t latency_ms,
                                 const std::string& model, const std::vector<Detection>& dets,
                                 const ClassTable& classes) {
    DetectionEvent e;
    e.source_id = source_id;
    e.frame_index = frame_index;
    e.timestamp_ms = timestamp_ms;
    e.latency_ms = latency_ms;
    e.model = model;
    for (const auto& d : dets) {
        e.detections.push_back({classes.name(d.class_id),
                                std::round(d.confidence * 10000.0) / 10000.0,
                                std::llround(d.box.x1()), std::llround(d.box.y1()),
                                std::llround(d.box.x2()), std::llround(d.box.y2())});
    }
    return e;
}

/// One LF-terminated JSON object per event.
inline std::string to_json_line(const DetectionEvent& e) {
    nlohmann::ordered_json dets = nlohmann::ordered_json::array();
    for (const auto& d : e.detections) {
        dets.push_back({{"class", d.class_name},
                        {"confidence", d.confidence},
                        {"box", {d.x1, d.y1, d.x2, d.y2}}});
    }
    nlohmann::ordered_json j{{"source_id", e.source_id}, {"frame_index", e.frame_index},
                             {"timestamp_ms", e.timestamp_ms}, {"latency_ms", e.latency_ms},
                             {"model", e.model},             {"detections", std::move(dets)}};
    return j.dump() + "\n";
}

inline DetectionEvent event_from_json_line(std::string_view line) {
    try {
        const auto j = nlohmann::json::parse(line);
        DetectionEvent e;
        e.source_id = j.at("source_id").get<std::string>();
        e.frame_index = j.at("frame_index").get<int64_t>();
        e.timestamp_ms = j.at("timestamp_ms").get<int64_t>();
        e.latency_ms = j.at("latency_ms").get<int64_t>();
        e.model = j.at("model").get<std::string>();
        for (const auto& d : j.at("detections")) {
            const auto& box = d.at("box");
            e.detections.push_back({d.at("class").get<std::string>(),
                                    d.at("confidence").get<double>(), box.at(0).get<int64_t>(),
                                    box.at(1).get<int64_t>(), box.at(2).get<int64_t>(),
                                    box.at(3).get<int64_t>()});
        }
        return e;
    } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorCategory::Data, std::string("malformed detection event: ") + ex.what());
    }
}

}  // namespace netpen
