#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "netpen/error.hpp"
#include "netpen/geometry.hpp"

namespace netpen {

enum class HeadLayout { AnchorGrid, AnchorFree };

inline const char* layout_name(HeadLayout l) {
    return l == HeadLayout::AnchorGrid ? "anchor_grid" : "anchor_free";
}

struct AnchorSize {
    double width = 0.0;
    double height = 0.0;
};

/// One detection head level. `data` is laid out [anchor][gy][gx][channel];
/// anchor-free levels have a single implicit anchor slot.
struct HeadGrid {
    int stride = 0;
    int grid_w = 0;
    int grid_h = 0;
    int anchors_per_cell = 1;
    std::vector<double> data;

    double at(int anchor, int gy, int gx, int channel, int channels) const {
        return data[static_cast<size_t>(((anchor * grid_h + gy) * grid_w + gx)) * channels + channel];
    }
    double& at(int anchor, int gy, int gx, int channel, int channels) {
        return data[static_cast<size_t>(((anchor * grid_h + gy) * grid_w + gx)) * channels + channel];
    }
};

/// Raw detector head output across all levels.
/// AnchorGrid channels per location: tx ty tw th tobj tc[0..C)
/// AnchorFree channels per location: l t r b tc[0..C)
struct RawHeadOutput {
    HeadLayout layout = HeadLayout::AnchorFree;
    ImageSize input_size;
    int num_classes = 0;
    std::vector<HeadGrid> grids;
    std::vector<std::vector<AnchorSize>> anchors;  // per grid, AnchorGrid only

    int channels_per_location() const {
        return (layout == HeadLayout::AnchorGrid ? 5 : 4) + num_classes;
    }

    void validate() const {
        if (num_classes <= 0) {
            throw Error(ErrorCategory::Config, "head layout error: class count must be positive");
        }
        if (layout == HeadLayout::AnchorGrid && anchors.size() != grids.size()) {
            throw Error(ErrorCategory::Config, "head layout error: anchors must be given per grid");
        }
        if (layout == HeadLayout::AnchorFree && !anchors.empty()) {
            throw Error(ErrorCategory::Config, "head layout error: anchor-free output carries no anchors");
        }
        const int channels = channels_per_location();
        for (size_t g = 0; g < grids.size(); ++g) {
            const auto& grid = grids[g];
            if (grid.stride <= 0 || grid.grid_w <= 0 || grid.grid_h <= 0) {
                throw Error(ErrorCategory::Config, "head layout error: non-positive grid geometry");
            }
            if (grid.stride * grid.grid_w != input_size.width ||
                grid.stride * grid.grid_h != input_size.height) {
                throw Error(ErrorCategory::Config,
                            "head layout error: stride*grid does not tile the input size");
            }
            const int per_cell = layout == HeadLayout::AnchorGrid ? grid.anchors_per_cell : 1;
            if (layout == HeadLayout::AnchorGrid &&
                anchors[g].size() != static_cast<size_t>(per_cell)) {
                throw Error(ErrorCategory::Config,
                            "head layout error: anchor count does not match anchors_per_cell");
            }
            const size_t expected = static_cast<size_t>(per_cell) * grid.grid_w * grid.grid_h *
                                    static_cast<size_t>(channels);
            if (grid.data.size() != expected) {
                throw Error(ErrorCategory::Config,
                            "head layout error: channel count does not match the class table (grid " +
                                std::to_string(g) + " has " + std::to_string(grid.data.size()) +
                                " values, expected " + std::to_string(expected) + ")");
            }
        }
    }
};

/// A decoded candidate or final detection, box in detector-input pixels
/// until mapped back to source space.
struct Detection {
    int class_id = 0;
    double confidence = 0.0;
    BoundingBox box;  // PixelCorner
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

namespace detail {

inline BoundingBox clamp_to(const BoundingBox& b, ImageSize bounds) {
    const double w = static_cast<double>(bounds.width);
    const double h = static_cast<double>(bounds.height);
    return BoundingBox::pixel_corner(std::clamp(b.x1(), 0.0, w), std::clamp(b.y1(), 0.0, h),
                                     std::clamp(b.x2(), 0.0, w), std::clamp(b.y2(), 0.0, h));
}

inline int argmax_class(const HeadGrid& grid, int anchor, int gy, int gx, int first_channel,
                        int num_classes, int channels) {
    int best = 0;
    double best_v = grid.at(anchor, gy, gx, first_channel, channels);
    for (int c = 1; c < num_classes; ++c) {
        const double v = grid.at(anchor, gy, gx, first_channel + c, channels);
        if (v > best_v) {
            best_v = v;
            best = c;
        }
    }
    return best;
}

}  // namespace detail

/// Anchor-based decode. Per (cell, anchor) with terms (tx ty tw th tobj tc...):
///   center = (g + 2*sigmoid(t) - 1) * stride          (offset range (-1,1))
///   size   = (2*sigmoid(t))^2 * anchor
///   confidence = sigmoid(tobj)^2 * sigmoid(tc_best)
/// All-zero terms at cell (0,0) with a square anchor therefore decode to a
/// box centered on the cell origin at anchor size, confidence 0.125.
inline std::vector<Detection> decode_anchor_grid(const RawHeadOutput& raw) {
    if (raw.layout != HeadLayout::AnchorGrid) {
        throw Error(ErrorCategory::Config, "decode_anchor_grid() requires AnchorGrid layout");
    }
    raw.validate();
    const int channels = raw.channels_per_location();
    std::vector<Detection> out;
    for (size_t g = 0; g < raw.grids.size(); ++g) {
        const auto& grid = raw.grids[g];
        const double stride = static_cast<double>(grid.stride);
        for (int a = 0; a < grid.anchors_per_cell; ++a) {
            const AnchorSize anchor = raw.anchors[g][static_cast<size_t>(a)];
            for (int gy = 0; gy < grid.grid_h; ++gy) {
                for (int gx = 0; gx < grid.grid_w; ++gx) {
                    const double cx = (gx + 2.0 * sigmoid(grid.at(a, gy, gx, 0, channels)) - 1.0) * stride;
                    const double cy = (gy + 2.0 * sigmoid(grid.at(a, gy, gx, 1, channels)) - 1.0) * stride;
                    const double tw = 2.0 * sigmoid(grid.at(a, gy, gx, 2, channels));
                    const double th = 2.0 * sigmoid(grid.at(a, gy, gx, 3, channels));
                    const double bw = tw * tw * anchor.width;
                    const double bh = th * th * anchor.height;
                    const double obj = sigmoid(grid.at(a, gy, gx, 4, channels));
                    const int cls = detail::argmax_class(grid, a, gy, gx, 5, raw.num_classes, channels);
                    const double conf = obj * obj * sigmoid(grid.at(a, gy, gx, 5 + cls, channels));
                    out.push_back({cls, conf,
                                   detail::clamp_to(BoundingBox::pixel_corner(cx - bw / 2.0, cy - bh / 2.0,
                                                                              cx + bw / 2.0, cy + bh / 2.0),
                                                    raw.input_size)});
                }
            }
        }
    }
    return out;
}

/// Anchor-free decode. Box terms are non-negative distances (l t r b) in
/// stride units from the cell-center point; confidence = sigmoid(tc_best).
inline std::vector<Detection> decode_anchor_free(const RawHeadOutput& raw) {
    if (raw.layout != HeadLayout::AnchorFree) {
        throw Error(ErrorCategory::Config, "decode_anchor_free() requires AnchorFree layout");
    }
    raw.validate();
    const int channels = raw.channels_per_location();
    std::vector<Detection> out;
    for (const auto& grid : raw.grids) {
        const double stride = static_cast<double>(grid.stride);
        for (int gy = 0; gy < grid.grid_h; ++gy) {
            for (int gx = 0; gx < grid.grid_w; ++gx) {
                const double l = grid.at(0, gy, gx, 0, channels);
                const double t = grid.at(0, gy, gx, 1, channels);
                const double r = grid.at(0, gy, gx, 2, channels);
                const double b = grid.at(0, gy, gx, 3, channels);
                if (l < 0.0 || t < 0.0 || r < 0.0 || b < 0.0) {
                    throw Error(ErrorCategory::Data,
                                "decode error: negative anchor-free distance term");
                }
                const int cls = detail::argmax_class(grid, 0, gy, gx, 4, raw.num_classes, channels);
                const double conf = sigmoid(grid.at(0, gy, gx, 4 + cls, channels));
                const double px = (gx + 0.5) * stride;
                const double py = (gy + 0.5) * stride;
                out.push_back({cls, conf,
                               detail::clamp_to(BoundingBox::pixel_corner(px - l * stride, py - t * stride,
                                                                          px + r * stride, py + b * stride),
                                                raw.input_size)});
            }
        }
    }
    return out;
}

inline std::vector<Detection> decode(const RawHeadOutput& raw) {
    return raw.layout == HeadLayout::AnchorGrid ? decode_anchor_grid(raw) : decode_anchor_free(raw);
}

/// Keep exactly the detections with confidence >= tau, order preserved.
/// The threshold is inclusive.
inline std::vector<Detection> threshold_confidence(const std::vector<Detection>& candidates,
                                                   double tau) {
    std::vector<Detection> out;
    out.reserve(candidates.size());
    for (const auto& d : candidates) {
        if (d.confidence >= tau) out.push_back(d);
    }
    return out;
}

namespace detail {

/// Confidence-descending order; ties prefer smaller area, then input order.
inline bool nms_before(const std::vector<Detection>& dets, size_t lhs, size_t rhs) {
    const auto& a = dets[lhs];
    const auto& b = dets[rhs];
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    const double area_a = a.box.area();
    const double area_b = b.box.area();
    if (area_a != area_b) return area_a < area_b;
    return lhs < rhs;
}

}  // namespace detail

/// Greedy per-class non-maximum suppression: keep the highest-confidence box,
/// suppress same-class boxes with IoU strictly above `iou_thresh` against any
/// kept box. Output sorted by descending confidence (ties: smaller area, then
/// input order). Classes never suppress each other.
inline std::vector<Detection> nms(const std::vector<Detection>& candidates, double iou_thresh) {
    std::vector<size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return detail::nms_before(candidates, a, b); });

    std::vector<size_t> kept;
    for (size_t idx : order) {
        bool suppressed = false;
        for (size_t k : kept) {
            if (candidates[k].class_id != candidates[idx].class_id) continue;
            if (iou(candidates[k].box, candidates[idx].box) > iou_thresh) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(idx);
    }
    std::vector<Detection> out;
    out.reserve(kept.size());
    for (size_t idx : kept) out.push_back(candidates[idx]);
    return out;
}

}  // namespace netpen
