#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include <nlohmann/json.hpp>

#include "netpen/decode.hpp"
#include "netpen/error.hpp"
#include "netpen/frame.hpp"
#include "netpen/geometry.hpp"
#include "netpen/labels.hpp"
#include "netpen/random.hpp"

namespace netpen {

/// Letterboxed planar float tensor (RGB, CHW, values in [0,1]) plus the
/// transform that produced it.
struct PreprocessedFrame {
    std::vector<float> data;
    ImageSize size;
    LetterboxTransform transform;
};

constexpr double kLetterboxPadValue = 114.0 / 255.0;

/// Aspect-preserving resize with symmetric 114-gray padding to the detector
/// input size. The returned transform maps source pixels to input pixels.
inline PreprocessedFrame preprocess(const FramePacket& frame, ImageSize input_size) {
    if (frame.pixels.empty() || frame.width <= 0 || frame.height <= 0) {
        throw Error(ErrorCategory::Data,
                    "frame decode error: empty frame from source " + frame.source_id);
    }
    if (input_size.width <= 0 || input_size.height <= 0) {
        throw Error(ErrorCategory::Config, "detector input size must be positive");
    }
    const auto t = LetterboxTransform::fit({frame.width, frame.height}, input_size);

    const int content_w = std::max(1, static_cast<int>(std::lround(frame.width * t.scale)));
    const int content_h = std::max(1, static_cast<int>(std::lround(frame.height * t.scale)));
    const int pad_left = static_cast<int>(std::floor(t.pad_x));
    const int pad_top = static_cast<int>(std::floor(t.pad_y));

    cv::Mat resized;
    if (content_w == frame.pixels.cols && content_h == frame.pixels.rows) {
        resized = frame.pixels;
    } else {
        cv::resize(frame.pixels, resized, cv::Size(content_w, content_h), 0, 0, cv::INTER_LINEAR);
    }

    PreprocessedFrame out;
    out.size = input_size;
    out.transform = t;
    const size_t plane = static_cast<size_t>(input_size.width) * input_size.height;
    out.data.assign(plane * 3, static_cast<float>(kLetterboxPadValue));

    // BGR input -> RGB planes.
    for (int y = 0; y < content_h; ++y) {
        const int ty = y + pad_top;
        if (ty < 0 || ty >= input_size.height) continue;
        const auto* row = resized.ptr<cv::Vec3b>(y);
        for (int x = 0; x < content_w; ++x) {
            const int tx = x + pad_left;
            if (tx < 0 || tx >= input_size.width) continue;
            const size_t idx = static_cast<size_t>(ty) * input_size.width + tx;
            out.data[idx] = row[x][2] / 255.0f;
            out.data[plane + idx] = row[x][1] / 255.0f;
            out.data[2 * plane + idx] = row[x][0] / 255.0f;
        }
    }
    return out;
}

struct BackendCapability {
    ImageSize input_size{640, 640};
    HeadLayout layout = HeadLayout::AnchorFree;
    ClassTable classes;
    std::string model_id;
    bool single_session = false;  // true: pipeline serializes calls
};

/// Everything a backend may key its output on. Deterministic backends must
/// produce identical output for identical context.
struct BackendInput {
    const PreprocessedFrame* frame = nullptr;
    std::string image_id;
    ImageSize source_size;
};

/// Either raw head output to be decoded per layout, or already-decoded
/// candidates in detector-input pixel space.
using BackendOutput = std::variant<RawHeadOutput, std::vector<Detection>>;

class DetectorBackend {
public:
    virtual ~DetectorBackend() = default;
    virtual const BackendCapability& capability() const = 0;
    virtual BackendOutput run(const BackendInput& input) = 0;
};

/// Deterministic ground-truth-driven test double. All randomness is keyed by
/// (seed, image_id): repeat calls for a frame are identical regardless of the
/// order frames are visited in.
struct StubDetectorConfig {
    double base_confidence = 0.8;
    double miss_rate = 0.0;            // probability a ground-truth box is dropped
    double false_positive_rate = 0.0;  // expected spurious boxes per frame (Poisson)
    double jitter = 0.0;               // coordinate noise amplitude, normalized units
    uint64_t seed = 0;

    void validate() const {
        if (base_confidence < 0.0 || base_confidence > 1.0 || miss_rate < 0.0 || miss_rate > 1.0 ||
            false_positive_rate < 0.0 || jitter < 0.0) {
            throw Error(ErrorCategory::Config, "stub detector config out of range");
        }
    }
};

inline StubDetectorConfig stub_config_from_json(const nlohmann::json& j) {
    StubDetectorConfig c;
    try {
        c.base_confidence = j.value("base_confidence", c.base_confidence);
        c.miss_rate = j.value("miss_rate", c.miss_rate);
        c.false_positive_rate = j.value("false_positive_rate", c.false_positive_rate);
        c.jitter = j.value("jitter", c.jitter);
        c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCategory::Data, std::string("malformed stub config: ") + e.what());
    }
    c.validate();
    return c;
}

inline nlohmann::ordered_json to_json(const StubDetectorConfig& c) {
    return {{"base_confidence", c.base_confidence},
            {"miss_rate", c.miss_rate},
            {"false_positive_rate", c.false_positive_rate},
            {"jitter", c.jitter},
            {"seed", c.seed}};
}

/// A stub candidate in normalized source coordinates.
struct StubCandidate {
    int class_id = 0;
    double confidence = 0.0;
    BoundingBox box;  // NormalizedCenter
};

class StubDetector : public DetectorBackend {
public:
    StubDetector(StubDetectorConfig config, const DatasetManifest& manifest,
                 ImageSize input_size = {640, 640})
        : config_(config), ground_truth_(load_ground_truth(manifest)) {
        config_.validate();
        capability_.input_size = input_size;
        capability_.layout = HeadLayout::AnchorFree;
        capability_.classes = manifest.classes;
        capability_.model_id = "stub";
        capability_.single_session = false;
    }

    const BackendCapability& capability() const override { return capability_; }

    const StubDetectorConfig& config() const { return config_; }

    /// The stub's per-frame decisions: which ground-truth boxes it keeps, at
    /// what confidence and with what coordinate noise, plus Poisson spurious
    /// boxes. Pure function of (seed, image_id); image ids without annotations
    /// are treated as empty frames.
    std::vector<StubCandidate> candidates_for(const std::string& image_id) const {
        std::vector<StubCandidate> out;
        auto rng = keyed_engine(config_.seed, image_id);
        const auto it = ground_truth_.find(image_id);
        if (it != ground_truth_.end()) {
            for (const auto& record : it->second) {
                // Fixed draw budget per record keeps decisions for record k
                // independent of the jitter/fp configuration.
                const double u_miss = next_double(rng);
                const double u_conf = next_double(rng);
                double noise[4];
                for (double& n : noise) n = next_double(rng);
                if (u_miss < config_.miss_rate) continue;
                StubCandidate cand;
                cand.class_id = record.class_id;
                cand.confidence =
                    std::clamp(config_.base_confidence + config_.jitter * (u_conf - 0.5), 0.0, 1.0);
                cand.box = BoundingBox::normalized_center(
                    std::clamp(record.box.cx() + config_.jitter * (2.0 * noise[0] - 1.0), 0.0, 1.0),
                    std::clamp(record.box.cy() + config_.jitter * (2.0 * noise[1] - 1.0), 0.0, 1.0),
                    std::clamp(record.box.w() + config_.jitter * (2.0 * noise[2] - 1.0), 0.0, 1.0),
                    std::clamp(record.box.h() + config_.jitter * (2.0 * noise[3] - 1.0), 0.0, 1.0));
                out.push_back(std::move(cand));
            }
        }
        const int spurious = next_poisson(rng, config_.false_positive_rate);
        const auto& classes = capability_.classes.classes();
        for (int i = 0; i < spurious && !classes.empty(); ++i) {
            StubCandidate cand;
            cand.class_id = classes[next_below(rng, classes.size())].id;
            cand.confidence = 0.05 + 0.9 * next_double(rng);
            cand.box = BoundingBox::normalized_center(next_double(rng), next_double(rng),
                                                      0.02 + 0.38 * next_double(rng),
                                                      0.02 + 0.38 * next_double(rng));
            out.push_back(std::move(cand));
        }
        return out;
    }

    BackendOutput run(const BackendInput& input) override {
        std::vector<Detection> dets;
        for (const auto& cand : candidates_for(input.image_id)) {
            const auto pixel = to_pixel(cand.box, input.source_size);
            dets.push_back({cand.class_id, cand.confidence,
                            input.frame ? letterbox_apply(pixel, input.frame->transform) : pixel});
        }
        return dets;
    }

private:
    StubDetectorConfig config_;
    BackendCapability capability_;
    std::map<std::string, std::vector<GroundTruthRecord>> ground_truth_;
};

/// External model descriptor: geometry and class table for an exported
/// detector. Execution requires an inference runtime; this build ships the
/// descriptor contract and the stub backend.
struct ModelDescriptor {
    std::string model_path;
    HeadLayout layout = HeadLayout::AnchorFree;
    ImageSize input_size{640, 640};
    std::vector<int> strides;
    std::vector<std::vector<AnchorSize>> anchors;  // per stride, anchor-grid only
    ClassTable classes;
};

inline ModelDescriptor model_descriptor_from_json(const nlohmann::json& j) {
    ModelDescriptor d;
    try {
        d.model_path = j.at("model_path").get<std::string>();
        const auto layout = j.at("layout").get<std::string>();
        if (layout == "anchor_grid") {
            d.layout = HeadLayout::AnchorGrid;
        } else if (layout == "anchor_free") {
            d.layout = HeadLayout::AnchorFree;
        } else {
            throw Error(ErrorCategory::Data, "model descriptor: unknown layout '" + layout + "'");
        }
        const auto size = j.at("input_size");
        d.input_size = {size.at(0).get<int>(), size.at(1).get<int>()};
        d.strides = j.at("strides").get<std::vector<int>>();
        if (j.contains("anchors")) {
            for (const auto& per_stride : j.at("anchors")) {
                std::vector<AnchorSize> row;
                for (const auto& a : per_stride) {
                    row.push_back({a.at(0).get<double>(), a.at(1).get<double>()});
                }
                d.anchors.push_back(std::move(row));
            }
        }
        std::vector<ClassId> classes;
        for (const auto& c : j.at("classes")) {
            classes.push_back({c.at("id").get<int>(), c.at("name").get<std::string>()});
        }
        d.classes = ClassTable(std::move(classes));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCategory::Data, std::string("malformed model descriptor: ") + e.what());
    }

    if (d.input_size.width <= 0 || d.input_size.height <= 0) {
        throw Error(ErrorCategory::Data, "model descriptor: input size must be positive");
    }
    if (d.strides.empty()) {
        throw Error(ErrorCategory::Data, "model descriptor: at least one stride required");
    }
    for (int s : d.strides) {
        if (s <= 0 || d.input_size.width % s != 0 || d.input_size.height % s != 0) {
            throw Error(ErrorCategory::Data,
                        "model descriptor: stride " + std::to_string(s) + " does not tile the input");
        }
    }
    if (d.layout == HeadLayout::AnchorGrid && d.anchors.size() != d.strides.size()) {
        throw Error(ErrorCategory::Data,
                    "model descriptor: anchor-grid layout needs anchors per stride");
    }
    if (d.layout == HeadLayout::AnchorFree && !d.anchors.empty()) {
        throw Error(ErrorCategory::Data, "model descriptor: anchor-free layout carries no anchors");
    }
    if (d.classes.empty()) {
        throw Error(ErrorCategory::Data, "model descriptor: class table is empty");
    }
    return d;
}

inline ModelDescriptor load_model_descriptor(const std::filesystem::path& path) {
    try {
        return model_descriptor_from_json(nlohmann::json::parse(read_text_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCategory::Data, "model descriptor is not valid JSON: " + std::string(e.what()));
    }
}

/// Open an external model behind the backend interface. Runtime execution is
/// an optional build capability; without a bundled runtime this reports a
/// backend error naming the model.
inline std::unique_ptr<DetectorBackend> open_model_backend(const ModelDescriptor& d) {
    throw Error(ErrorCategory::Backend,
                "backend error [" + d.model_path +
                    "]: no inference runtime compiled into this build; use the stub backend");
}

struct DetectOptions {
    double confidence = 0.3;  // inclusive threshold, applied before NMS
    double nms_iou = 0.45;
    std::optional<ClassTable> expected_classes;
};

/// Full single-frame detection: preprocess -> backend -> decode -> threshold
/// -> per-class NMS -> map back to source pixels, sorted by confidence.
inline std::vector<Detection> detect(const FramePacket& frame, DetectorBackend& backend,
                                     const DetectOptions& options = {}) {
    const auto& cap = backend.capability();
    if (options.expected_classes && !(*options.expected_classes == cap.classes)) {
        throw Error(ErrorCategory::Config,
                    "configuration error: backend '" + cap.model_id +
                        "' class table does not match the configured classes");
    }
    const auto pre = preprocess(frame, cap.input_size);
    BackendInput input{&pre, frame.image_id, ImageSize{frame.width, frame.height}};

    BackendOutput raw = [&] {
        try {
            return backend.run(input);
        } catch (const Error&) {
            throw;
        } catch (const std::exception& e) {
            throw Error(ErrorCategory::Backend,
                        "backend error [" + cap.model_id + "]: " + e.what());
        }
    }();

    std::vector<Detection> candidates;
    if (std::holds_alternative<RawHeadOutput>(raw)) {
        candidates = decode(std::get<RawHeadOutput>(raw));
    } else {
        candidates = std::move(std::get<std::vector<Detection>>(raw));
    }

    auto kept = nms(threshold_confidence(candidates, options.confidence), options.nms_iou);
    for (auto& d : kept) {
        d.box = letterbox_map(d.box, pre.transform);
    }
    return kept;  // nms output is already confidence-descending
}

}  // namespace netpen
