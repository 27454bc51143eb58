#pragma once

#include <chrono>
#include <cstdint>
#include <string>

#include <opencv2/core.hpp>

namespace netpen {

/// One decoded frame flowing through the pipeline. `timestamp_ms` is media
/// time from stream start (frame_index / fps), not wall clock, so event logs
/// replay deterministically; `capture_time` is kept separately for latency.
struct FramePacket {
    int64_t frame_index = 0;
    int64_t timestamp_ms = 0;
    std::string source_id;
    std::string image_id;
    int width = 0;
    int height = 0;
    cv::Mat pixels;  // BGR
    std::chrono::steady_clock::time_point capture_time{};
};

}  // namespace netpen
