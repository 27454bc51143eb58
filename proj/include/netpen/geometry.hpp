#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "netpen/error.hpp"

namespace netpen {

struct ImageSize {
    int width = 0;
    int height = 0;

    bool operator==(const ImageSize&) const = default;
};

/// Coordinate convention carried by every box.
///   NormalizedCenter: (cx, cy, w, h), fractions of the image dimensions.
///   PixelCorner:      (x1, y1, x2, y2) in pixels, x1 <= x2, y1 <= y2.
enum class BoxConvention { NormalizedCenter, PixelCorner };

struct BoundingBox {
    BoxConvention convention = BoxConvention::PixelCorner;
    double c0 = 0.0, c1 = 0.0, c2 = 0.0, c3 = 0.0;

    static BoundingBox normalized_center(double cx, double cy, double w, double h) {
        return {BoxConvention::NormalizedCenter, cx, cy, w, h};
    }
    static BoundingBox pixel_corner(double x1, double y1, double x2, double y2) {
        return {BoxConvention::PixelCorner, x1, y1, x2, y2};
    }

    // NormalizedCenter accessors
    double cx() const { return c0; }
    double cy() const { return c1; }
    double w() const { return c2; }
    double h() const { return c3; }

    // PixelCorner accessors
    double x1() const { return c0; }
    double y1() const { return c1; }
    double x2() const { return c2; }
    double y2() const { return c3; }

    /// Corner view (x1, y1, x2, y2) in the box's own units.
    std::array<double, 4> corners() const {
        if (convention == BoxConvention::PixelCorner) return {c0, c1, c2, c3};
        return {c0 - c2 / 2.0, c1 - c3 / 2.0, c0 + c2 / 2.0, c1 + c3 / 2.0};
    }

    double area() const {
        if (convention == BoxConvention::NormalizedCenter) return c2 * c3;
        return (c2 - c0) * (c3 - c1);
    }

    bool operator==(const BoundingBox&) const = default;
};

/// Intersection-over-union of two boxes sharing a convention.
/// Defined as 0 when the union has zero area.
inline double iou(const BoundingBox& a, const BoundingBox& b) {
    if (a.convention != b.convention) {
        throw Error(ErrorCategory::Data,
                    "convention mismatch: iou() requires both boxes in the same convention");
    }
    const auto ca = a.corners();
    const auto cb = b.corners();
    const double ix = std::max(0.0, std::min(ca[2], cb[2]) - std::max(ca[0], cb[0]));
    const double iy = std::max(0.0, std::min(ca[3], cb[3]) - std::max(ca[1], cb[1]));
    const double inter = ix * iy;
    const double area_a = (ca[2] - ca[0]) * (ca[3] - ca[1]);
    const double area_b = (cb[2] - cb[0]) * (cb[3] - cb[1]);
    const double uni = area_a + area_b - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

/// Normalized-center -> pixel-corner conversion, clamped to the image bounds.
/// Edge-touching labels whose extent spills past [0,1] are clamped, not rejected.
inline BoundingBox to_pixel(const BoundingBox& box, ImageSize image) {
    if (box.convention != BoxConvention::NormalizedCenter) {
        throw Error(ErrorCategory::Data, "to_pixel() expects a NormalizedCenter box");
    }
    if (image.width <= 0 || image.height <= 0) {
        throw Error(ErrorCategory::Data, "invalid dimensions: image width/height must be positive");
    }
    const double w = static_cast<double>(image.width);
    const double h = static_cast<double>(image.height);
    const auto c = box.corners();
    return BoundingBox::pixel_corner(std::clamp(c[0] * w, 0.0, w), std::clamp(c[1] * h, 0.0, h),
                                     std::clamp(c[2] * w, 0.0, w), std::clamp(c[3] * h, 0.0, h));
}

/// Pixel-corner -> normalized-center conversion (inverse of to_pixel for
/// boxes inside the image).
inline BoundingBox to_normalized(const BoundingBox& box, ImageSize image) {
    if (box.convention != BoxConvention::PixelCorner) {
        throw Error(ErrorCategory::Data, "to_normalized() expects a PixelCorner box");
    }
    if (image.width <= 0 || image.height <= 0) {
        throw Error(ErrorCategory::Data, "invalid dimensions: image width/height must be positive");
    }
    const double w = static_cast<double>(image.width);
    const double h = static_cast<double>(image.height);
    return BoundingBox::normalized_center((box.x1() + box.x2()) / 2.0 / w,
                                          (box.y1() + box.y2()) / 2.0 / h,
                                          (box.x2() - box.x1()) / w,
                                          (box.y2() - box.y1()) / h);
}

/// Aspect-preserving resize-plus-pad mapping between a source image and a
/// fixed detector input. Pads are symmetric and may be fractional.
struct LetterboxTransform {
    double scale = 1.0;
    double pad_x = 0.0;
    double pad_y = 0.0;
    ImageSize source_size;
    ImageSize target_size;

    static LetterboxTransform fit(ImageSize source, ImageSize target) {
        if (source.width <= 0 || source.height <= 0 || target.width <= 0 || target.height <= 0) {
            throw Error(ErrorCategory::Data, "invalid dimensions: letterbox sizes must be positive");
        }
        LetterboxTransform t;
        t.source_size = source;
        t.target_size = target;
        t.scale = std::min(static_cast<double>(target.width) / source.width,
                           static_cast<double>(target.height) / source.height);
        t.pad_x = (target.width - source.width * t.scale) / 2.0;
        t.pad_y = (target.height - source.height * t.scale) / 2.0;
        return t;
    }

    bool valid() const {
        return scale > 0.0 && pad_x >= 0.0 && pad_y >= 0.0 &&
               std::abs(scale * source_size.width + 2.0 * pad_x - target_size.width) <= 1.0 &&
               std::abs(scale * source_size.height + 2.0 * pad_y - target_size.height) <= 1.0;
    }
};

/// Map a pixel-corner box from source space into letterboxed target space.
inline BoundingBox letterbox_apply(const BoundingBox& box, const LetterboxTransform& t) {
    const double tw = static_cast<double>(t.target_size.width);
    const double th = static_cast<double>(t.target_size.height);
    return BoundingBox::pixel_corner(std::clamp(box.x1() * t.scale + t.pad_x, 0.0, tw),
                                     std::clamp(box.y1() * t.scale + t.pad_y, 0.0, th),
                                     std::clamp(box.x2() * t.scale + t.pad_x, 0.0, tw),
                                     std::clamp(box.y2() * t.scale + t.pad_y, 0.0, th));
}

/// Map a pixel-corner box from letterboxed target space back to source
/// pixels: subtract pads, divide by scale, clamp to the source bounds.
inline BoundingBox letterbox_map(const BoundingBox& box, const LetterboxTransform& t) {
    const double sw = static_cast<double>(t.source_size.width);
    const double sh = static_cast<double>(t.source_size.height);
    return BoundingBox::pixel_corner(std::clamp((box.x1() - t.pad_x) / t.scale, 0.0, sw),
                                     std::clamp((box.y1() - t.pad_y) / t.scale, 0.0, sh),
                                     std::clamp((box.x2() - t.pad_x) / t.scale, 0.0, sw),
                                     std::clamp((box.y2() - t.pad_y) / t.scale, 0.0, sh));
}

}  // namespace netpen
