#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>
#include <opencv2/videoio.hpp>

#include "netpen/error.hpp"
#include "netpen/frame.hpp"
#include "netpen/image.hpp"

namespace netpen {

/// Pull-based frame producer. Implementations must hand out strictly
/// increasing frame indices and non-decreasing timestamps.
class FrameSource {
public:
    virtual ~FrameSource() = default;
    virtual std::string id() const = 0;
    virtual double fps() const = 0;
    virtual std::optional<FramePacket> next() = 0;
};

namespace detail {

/// Sort key for image sequences: stem prefix, then numeric suffix, so
/// frame_2 orders before frame_10.
inline std::pair<std::string, long long> natural_key(const std::filesystem::path& p) {
    const std::string stem = p.stem().string();
    size_t digits = 0;
    while (digits < stem.size() && std::isdigit(static_cast<unsigned char>(stem[stem.size() - 1 - digits]))) {
        ++digits;
    }
    if (digits == 0 || digits > 18) return {stem, -1};
    return {stem.substr(0, stem.size() - digits), std::stoll(stem.substr(stem.size() - digits))};
}

}  // namespace detail

/// Reference source: a directory of PNG/JPEG frames in natural filename
/// order. Keeps the full test suite free of any video codec dependency.
class DirectoryFrameSource : public FrameSource {
public:
    explicit DirectoryFrameSource(const std::filesystem::path& dir, double fps = 30.0,
                                  std::string source_id = {})
        : fps_(fps), source_id_(source_id.empty() ? dir.filename().string() : std::move(source_id)) {
        if (!std::filesystem::is_directory(dir)) {
            throw Error(ErrorCategory::Data, "frame source error: not a directory: " + dir.string());
        }
        if (fps_ <= 0.0) {
            throw Error(ErrorCategory::Usage, "frame source fps must be positive");
        }
        for (const auto& e : std::filesystem::directory_iterator(dir)) {
            if (!e.is_regular_file()) continue;
            auto ext = e.path().extension().string();
            std::transform(ext.begin(), ext.end(), ext.begin(),
                           [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
            if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") files_.push_back(e.path());
        }
        std::sort(files_.begin(), files_.end(), [](const auto& a, const auto& b) {
            const auto ka = detail::natural_key(a);
            const auto kb = detail::natural_key(b);
            return ka != kb ? ka < kb : a.filename() < b.filename();
        });
    }

    std::string id() const override { return source_id_; }
    double fps() const override { return fps_; }
    size_t frame_count() const { return files_.size(); }

    std::optional<FramePacket> next() override {
        if (cursor_ >= files_.size()) return std::nullopt;
        const auto& path = files_[cursor_];
        FramePacket f;
        f.frame_index = static_cast<int64_t>(cursor_);
        f.timestamp_ms = std::llround(static_cast<double>(cursor_) * 1000.0 / fps_);
        f.source_id = source_id_;
        f.image_id = path.stem().string();
        f.pixels = load_image(path);
        f.width = f.pixels.cols;
        f.height = f.pixels.rows;
        f.capture_time = std::chrono::steady_clock::now();
        ++cursor_;
        return f;
    }

private:
    std::vector<std::filesystem::path> files_;
    size_t cursor_ = 0;
    double fps_;
    std::string source_id_;
};

/// Video container source; decoding is delegated to the external decoder.
class VideoFileSource : public FrameSource {
public:
    explicit VideoFileSource(const std::filesystem::path& path, std::string source_id = {})
        : source_id_(source_id.empty() ? path.stem().string() : std::move(source_id)) {
        if (!capture_.open(path.string())) {
            throw Error(ErrorCategory::Data, "frame source error: cannot open video " + path.string());
        }
        fps_ = capture_.get(cv::CAP_PROP_FPS);
        if (!(fps_ > 0.0) || !std::isfinite(fps_)) fps_ = 30.0;
    }

    std::string id() const override { return source_id_; }
    double fps() const override { return fps_; }

    std::optional<FramePacket> next() override {
        cv::Mat frame;
        if (!capture_.read(frame) || frame.empty()) return std::nullopt;
        FramePacket f;
        f.frame_index = index_;
        f.timestamp_ms = std::llround(static_cast<double>(index_) * 1000.0 / fps_);
        f.source_id = source_id_;
        f.image_id = source_id_ + "_" + std::to_string(index_);
        f.pixels = std::move(frame);
        f.width = f.pixels.cols;
        f.height = f.pixels.rows;
        f.capture_time = std::chrono::steady_clock::now();
        ++index_;
        return f;
    }

private:
    cv::VideoCapture capture_;
    int64_t index_ = 0;
    double fps_;
    std::string source_id_;
};

/// In-memory generated frames, for tests and throughput measurements.
class SyntheticFrameSource : public FrameSource {
public:
    SyntheticFrameSource(size_t frame_count, ImageSize size, double fps = 30.0,
                         std::string source_id = "synthetic")
        : count_(frame_count), size_(size), fps_(fps), source_id_(std::move(source_id)) {}

    std::string id() const override { return source_id_; }
    double fps() const override { return fps_; }

    std::optional<FramePacket> next() override {
        if (index_ >= static_cast<int64_t>(count_)) return std::nullopt;
        FramePacket f;
        f.frame_index = index_;
        f.timestamp_ms = std::llround(static_cast<double>(index_) * 1000.0 / fps_);
        f.source_id = source_id_;
        f.image_id = source_id_ + "_" + std::to_string(index_);
        f.pixels = cv::Mat(size_.height, size_.width, CV_8UC3,
                           cv::Scalar(40 + index_ % 64, 80, 120));
        f.width = size_.width;
        f.height = size_.height;
        f.capture_time = std::chrono::steady_clock::now();
        ++index_;
        return f;
    }

private:
    size_t count_;
    ImageSize size_;
    double fps_;
    std::string source_id_;
    int64_t index_ = 0;
};

/// Directory paths become frame-directory sources; files go to the video
/// decoder. `fps_hint` applies to directories (declared playback rate).
inline std::unique_ptr<FrameSource> make_frame_source(const std::filesystem::path& path,
                                                      double fps_hint = 30.0) {
    if (std::filesystem::is_directory(path)) {
        return std::make_unique<DirectoryFrameSource>(path, fps_hint);
    }
    if (!std::filesystem::exists(path)) {
        throw Error(ErrorCategory::Data, "frame source error: no such path: " + path.string());
    }
    return std::make_unique<VideoFileSource>(path);
}

}  // namespace netpen
