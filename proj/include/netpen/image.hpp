#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "netpen/decode.hpp"
#include "netpen/error.hpp"
#include "netpen/labels.hpp"

namespace netpen {

inline cv::Mat load_image(const std::filesystem::path& path) {
    cv::Mat img = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (img.empty()) {
        throw Error(ErrorCategory::Data, "frame decode error: cannot read image " + path.string());
    }
    return img;
}

inline void save_png(const std::filesystem::path& path, const cv::Mat& image) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    if (!cv::imwrite(path.string(), image)) {
        throw Error(ErrorCategory::Data, "cannot write image " + path.string());
    }
}

/// Burn detection boxes and labels into a BGR frame.
inline void draw_detections(cv::Mat& frame, const std::vector<Detection>& detections,
                            const ClassTable& classes) {
    static const cv::Scalar palette[] = {
        {80, 200, 80}, {60, 60, 230}, {230, 160, 40}, {200, 200, 40}, {180, 60, 180},
    };
    for (const auto& d : detections) {
        const cv::Scalar color = palette[static_cast<size_t>(d.class_id) % std::size(palette)];
        const cv::Point p1(static_cast<int>(std::lround(d.box.x1())),
                           static_cast<int>(std::lround(d.box.y1())));
        const cv::Point p2(static_cast<int>(std::lround(d.box.x2())),
                           static_cast<int>(std::lround(d.box.y2())));
        cv::rectangle(frame, p1, p2, color, 2);
        char label[96];
        std::snprintf(label, sizeof(label), "%s %.2f",
                      classes.contains(d.class_id) ? classes.name(d.class_id).c_str() : "?",
                      d.confidence);
        cv::putText(frame, label, {p1.x, std::max(12, p1.y - 4)}, cv::FONT_HERSHEY_SIMPLEX, 0.45,
                    color, 1, cv::LINE_AA);
    }
}

}  // namespace netpen
