#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "bristolnet/errors.hpp"
#include "bristolnet/image.hpp"
#include "bristolnet/metrics.hpp"
#include "bristolnet/rng.hpp"

namespace bristolnet {

/// Morphology recipe for one synthetic specimen. The per-level defaults
/// drawn by sample_specimen_spec make the seven Bristol levels separable by
/// shape alone:
///   1 -> >= 4 disjoint near-circular lumps        5 -> 2-3 soft-edged blobs
///   2 -> one lumpy elongated sausage              6 -> >= 4 ragged fragments
///   3,4 -> one smooth elongated sausage           7 -> one diffuse, holey splat
struct SpecimenSpec {
    int bss_level = 4;
    double coverage_ratio = 0.15;  // target foreground fraction, (0, 0.6]
    int fragment_count = 1;
    double elongation = 1.0;       // arc length / diameter for sausages
    double boundary_roughness = 0.0;
    uint64_t seed = 0;

    void validate() const {
        if (bss_level < 1 || bss_level > 7) throw ContractViolation("specimen: bss_level must be in [1,7]");
        if (!(coverage_ratio > 0.0 && coverage_ratio <= 0.6))
            throw ContractViolation("specimen: coverage_ratio must be in (0, 0.6]");
        if (fragment_count < 1) throw ContractViolation("specimen: fragment_count must be >= 1");
        if (elongation < 1.0) throw ContractViolation("specimen: elongation must be >= 1");
        if (boundary_roughness < 0.0 || boundary_roughness > 1.0)
            throw ContractViolation("specimen: boundary_roughness must be in [0,1]");
    }
};

/// Draws level-appropriate morphology parameters.
inline SpecimenSpec sample_specimen_spec(int level, double coverage, uint64_t seed) {
    Rng rng(derive_seed(seed, 11));
    SpecimenSpec s;
    s.bss_level = level;
    s.coverage_ratio = coverage;
    s.seed = seed;
    switch (level) {
        case 1:
            s.fragment_count = static_cast<int>(rng.range(4, 6));
            s.elongation = 1.0;
            s.boundary_roughness = rng.uniform(0.05, 0.15);
            break;
        case 2:
            s.fragment_count = 1;
            s.elongation = rng.uniform(2.0, 3.2);
            s.boundary_roughness = rng.uniform(0.5, 0.68);
            break;
        case 3:
            s.fragment_count = 1;
            s.elongation = rng.uniform(3.4, 5.0);
            s.boundary_roughness = rng.uniform(0.1, 0.25);
            break;
        case 4:
            s.fragment_count = 1;
            s.elongation = rng.uniform(3.8, 5.5);
            s.boundary_roughness = rng.uniform(0.02, 0.12);
            break;
        case 5:
            s.fragment_count = static_cast<int>(rng.range(2, 3));
            s.elongation = rng.uniform(1.0, 1.4);
            s.boundary_roughness = rng.uniform(0.15, 0.3);
            break;
        case 6:
            s.fragment_count = static_cast<int>(rng.range(4, 6));
            s.elongation = 1.0;
            s.boundary_roughness = rng.uniform(0.55, 0.8);
            break;
        default:  // 7
            s.fragment_count = 1;
            s.elongation = 1.0;
            s.boundary_roughness = rng.uniform(0.85, 1.0);
            break;
    }
    return s;
}

/// Scene composition knobs shared by positive and negative images.
struct SceneParams {
    int image_h = 64;
    int image_w = 64;
    enum class Background { ceramic_ellipse, flat } background = Background::ceramic_ellipse;
    double lighting_gradient = 0.25;
    int occluder_count = 0;   // paper-strip occluders
    int reflection_count = 0; // specular glints (render-only, never masked out)

    void validate() const {
        if (image_h < 16 || image_w < 16) throw ContractViolation("scene: image size must be at least 16x16");
        if (lighting_gradient < 0.0 || lighting_gradient > 1.0)
            throw ContractViolation("scene: lighting_gradient must be in [0,1]");
        if (occluder_count < 0 || reflection_count < 0) throw ContractViolation("scene: counts must be >= 0");
    }
};

struct Sample {
    ImageU8 image;
    MaskU8 mask;
};

namespace synth_detail {

constexpr double kPi = 3.14159265358979323846;

/// Wobbly disc: radius r * (1 + sum of harmonic perturbations).
struct Blob {
    double cx = 0, cy = 0, r = 1;
    int nharm = 0;
    std::array<double, 4> amp{};
    std::array<int, 4> freq{};
    std::array<double, 4> phase{};

    double radius_at(double phi) const {
        double m = 1.0;
        for (int i = 0; i < nharm; ++i) m += amp[static_cast<size_t>(i)] * std::sin(freq[static_cast<size_t>(i)] * phi + phase[static_cast<size_t>(i)]);
        return r * std::max(0.12, m);
    }
    double amp_total() const {
        double a = 0.0;
        for (int i = 0; i < nharm; ++i) a += std::abs(amp[static_cast<size_t>(i)]);
        return a;
    }
    double max_extent() const { return r * (1.0 + amp_total()); }
    /// Approximate signed distance: negative inside.
    double sdf(double x, double y) const {
        const double dx = x - cx, dy = y - cy;
        const double d = std::sqrt(dx * dx + dy * dy);
        return d - radius_at(std::atan2(dy, dx));
    }
};

/// Tube around a polyline with a modulated radius profile.
struct Snake {
    std::vector<std::array<double, 2>> pts;  // centerline samples, t uniform
    double r0 = 2.0;
    double lump_amp = 0.0;
    double lump_freq = 0.0;
    double lump_phase = 0.0;

    double radius_at(double t) const {
        const double cap = std::sqrt(std::max(0.0, 1.0 - std::pow(2.0 * t - 1.0, 6.0)));
        double m = 1.0 + lump_amp * std::sin(2.0 * kPi * lump_freq * t + lump_phase);
        return r0 * std::max(0.2, m) * cap;
    }

    double sdf(double x, double y) const {
        double best = 1e30;
        const size_t nseg = pts.size() - 1;
        for (size_t i = 0; i < nseg; ++i) {
            const double ax = pts[i][0], ay = pts[i][1];
            const double bx = pts[i + 1][0], by = pts[i + 1][1];
            const double ex = bx - ax, ey = by - ay;
            const double len2 = ex * ex + ey * ey;
            double u = len2 > 0 ? ((x - ax) * ex + (y - ay) * ey) / len2 : 0.0;
            u = std::clamp(u, 0.0, 1.0);
            const double px = ax + u * ex, py = ay + u * ey;
            const double dx = x - px, dy = y - py;
            const double t = (static_cast<double>(i) + u) / static_cast<double>(nseg);
            const double d = std::sqrt(dx * dx + dy * dy) - radius_at(t);
            best = std::min(best, d);
        }
        return best;
    }
};

/// One specimen = blobs and/or snakes minus interior holes (level 7).
struct Shape {
    std::vector<Blob> blobs;
    std::vector<Snake> snakes;
    std::vector<Blob> holes;

    /// Negative inside the specimen body.
    double sdf(double x, double y) const {
        double s = 1e30;
        for (const auto& b : blobs) s = std::min(s, b.sdf(x, y));
        for (const auto& sn : snakes) s = std::min(s, sn.sdf(x, y));
        for (const auto& h : holes) s = std::max(s, -h.sdf(x, y));
        return s;
    }

    void scale_widths(double f) {
        for (auto& b : blobs) b.r *= f;
        for (auto& s : snakes) s.r0 *= f;
        // holes follow their parent blob similarly, staying interior
        if (!holes.empty() && !blobs.empty()) {
            const double px = blobs[0].cx, py = blobs[0].cy;
            for (auto& h : holes) {
                h.r *= f;
                h.cx = px + (h.cx - px) * f;
                h.cy = py + (h.cy - py) * f;
            }
        }
    }
};

/// Smooth 2-octave value noise in [0,1], bilinear over hashed lattices.
struct ValueNoise {
    uint64_t seed;
    float at(double u, double v) const {  // u,v in [0,1]
        return 0.65f * octave(u, v, 5, 101) + 0.35f * octave(u, v, 11, 505);
    }
    float octave(double u, double v, int g, uint64_t salt) const {
        const double x = u * (g - 1), y = v * (g - 1);
        const int x0 = std::min(static_cast<int>(x), g - 2), y0 = std::min(static_cast<int>(y), g - 2);
        const double fx = x - x0, fy = y - y0;
        auto h = [&](int xi, int yi) {
            return static_cast<double>(hash_noise(seed + salt, static_cast<uint64_t>(yi) * 1024 + xi));
        };
        const double a = h(x0, y0) * (1 - fx) + h(x0 + 1, y0) * fx;
        const double b = h(x0, y0 + 1) * (1 - fx) + h(x0 + 1, y0 + 1) * fx;
        return static_cast<float>(a * (1 - fy) + b * fy);
    }
};

struct Rgb {
    double r, g, b;
};

inline Rgb level_color(int level, Rng& rng) {
    static const Rgb base[7] = {{94, 64, 38},   {108, 72, 40}, {122, 84, 46}, {131, 92, 52},
                                {143, 104, 60}, {152, 115, 66}, {163, 128, 78}};
    Rgb c = base[level - 1];
    const double jr = rng.uniform(-10, 10), jg = rng.uniform(-8, 8), jb = rng.uniform(-6, 6);
    return {c.r + jr, c.g + jg, c.b + jb};
}

inline double edge_softness(int level) {
    if (level == 5) return 1.6;
    if (level == 7) return 1.8;
    if (level == 6) return 1.0;
    return 0.8;
}

/// Rotated-rectangle occluder (paper strip).
struct Strip {
    double cx, cy, angle, half_len, half_wid;

    double sdf(double x, double y) const {
        const double ca = std::cos(angle), sa = std::sin(angle);
        const double dx = x - cx, dy = y - cy;
        const double u = std::abs(dx * ca + dy * sa) - half_len;
        const double v = std::abs(-dx * sa + dy * ca) - half_wid;
        return std::max(u, v);
    }
    bool covers(double x, double y) const { return sdf(x, y) < 0.0; }
};

struct Reflection {
    double cx, cy, rx, ry, angle, alpha;
};

/// Everything needed to paint one scene.
struct ScenePlan {
    SceneParams params;
    // ceramic background geometry
    double bowl_cx, bowl_cy, bowl_rx, bowl_ry;
    double water_scale;
    double light_dir;   // gradient direction
    Rgb tile, porcelain, water;
    std::vector<Reflection> reflections;
    std::vector<Strip> strips;  // placed later, against the specimen
    uint64_t noise_seed;
};

inline ScenePlan plan_scene(const SceneParams& sp, Rng& rng, uint64_t noise_seed) {
    ScenePlan plan;
    plan.params = sp;
    const double w = sp.image_w, h = sp.image_h;
    plan.bowl_cx = w * rng.uniform(0.46, 0.54);
    plan.bowl_cy = h * rng.uniform(0.46, 0.54);
    plan.bowl_rx = w * rng.uniform(0.42, 0.5);
    plan.bowl_ry = h * rng.uniform(0.42, 0.5);
    plan.water_scale = rng.uniform(0.58, 0.68);
    plan.light_dir = rng.uniform(0.0, 2.0 * kPi);
    const double tg = rng.uniform(-6, 6);
    plan.tile = {147 + tg, 145 + tg, 142 + tg};
    plan.porcelain = {232 + rng.uniform(-4, 4), 230 + rng.uniform(-4, 4), 226 + rng.uniform(-4, 4)};
    plan.water = {214 + rng.uniform(-5, 5), 219 + rng.uniform(-5, 5), 225 + rng.uniform(-5, 5)};
    for (int i = 0; i < sp.reflection_count; ++i) {
        Reflection r;
        r.cx = plan.bowl_cx + rng.uniform(-0.3, 0.3) * plan.bowl_rx;
        r.cy = plan.bowl_cy + rng.uniform(-0.3, 0.3) * plan.bowl_ry;
        r.rx = rng.uniform(0.05, 0.14) * w;
        r.ry = rng.uniform(0.03, 0.09) * h;
        r.angle = rng.uniform(0.0, kPi);
        r.alpha = rng.uniform(0.3, 0.55);
        plan.reflections.push_back(r);
    }
    plan.noise_seed = noise_seed;
    return plan;
}

inline Strip sample_strip(const SceneParams& sp, Rng& rng) {
    Strip s;
    s.cx = sp.image_w * rng.uniform(0.15, 0.85);
    s.cy = sp.image_h * rng.uniform(0.15, 0.85);
    s.angle = rng.uniform(0.0, kPi);
    s.half_len = sp.image_w * rng.uniform(0.22, 0.42);
    s.half_wid = rng.uniform(1.8, 3.5) * (sp.image_w / 64.0);
    return s;
}

}  // namespace synth_detail

// ---------------------------------------------------------------------------
// Mask morphology features. These back the training-free reference rule that
// guarantees the consolidated classes of generated data are separable.
// ---------------------------------------------------------------------------

struct MaskComponent {
    size_t area = 0;
    size_t perimeter = 0;  // count of 4-neighbor edges facing background/border
};

/// 4-connected component labeling with per-component area and edge-count
/// perimeter.
inline std::vector<MaskComponent> mask_components(const MaskU8& mask) {
    const int h = mask.h, w = mask.w;
    std::vector<int> label(static_cast<size_t>(h) * w, -1);
    std::vector<MaskComponent> comps;
    std::vector<int> stack;
    for (int start = 0; start < h * w; ++start) {
        if (mask.data[static_cast<size_t>(start)] == 0 || label[static_cast<size_t>(start)] >= 0) continue;
        const int id = static_cast<int>(comps.size());
        comps.push_back({});
        stack.push_back(start);
        label[static_cast<size_t>(start)] = id;
        while (!stack.empty()) {
            const int p = stack.back();
            stack.pop_back();
            const int y = p / w, x = p % w;
            ++comps[static_cast<size_t>(id)].area;
            const int dy[4] = {-1, 1, 0, 0}, dx[4] = {0, 0, -1, 1};
            for (int d = 0; d < 4; ++d) {
                const int ny = y + dy[d], nx = x + dx[d];
                if (ny < 0 || ny >= h || nx < 0 || nx >= w || mask.at(ny, nx) == 0) {
                    ++comps[static_cast<size_t>(id)].perimeter;
                    continue;
                }
                const int np = ny * w + nx;
                if (label[static_cast<size_t>(np)] < 0) {
                    label[static_cast<size_t>(np)] = id;
                    stack.push_back(np);
                }
            }
        }
    }
    return comps;
}

/// Whole-mask perimeter^2 / area (discrete, 4-neighbor edge perimeter).
inline double mask_compactness(const MaskU8& mask) {
    const auto comps = mask_components(mask);
    double area = 0.0, perim = 0.0;
    for (const auto& c : comps) {
        area += static_cast<double>(c.area);
        perim += static_cast<double>(c.perimeter);
    }
    BNET_REQUIRE(area > 0.0, "mask_compactness: empty mask");
    return perim * perim / area;
}

/// The documented training-free shape rule for consolidated classes.
/// Components below 4 px are rasterization slivers and are ignored. With
/// F = number of components, c = perimeter^2/area:
///   F >= 4 and mean per-fragment c <  60  -> constipation (level 1 lumps)
///   F >= 4 and mean per-fragment c >= 60  -> loose        (level 6 shreds)
///   F in {2,3}                            -> normal       (level 5 blobs)
///   F == 1 and whole-mask c <  55         -> normal       (levels 3-4)
///   F == 1 and whole-mask c in [55, 230)  -> constipation (level 2 lumpy)
///   F == 1 and whole-mask c >= 230        -> loose        (level 7 diffuse)
/// The thresholds were calibrated on 200 generated specimens per level.
inline StoolClass rule_classify(const MaskU8& mask) {
    auto comps = mask_components(mask);
    std::vector<MaskComponent> big;
    for (const auto& c : comps)
        if (c.area >= 4) big.push_back(c);
    BNET_REQUIRE(!big.empty(), "rule_classify: empty mask");
    if (big.size() >= 4) {
        double mean_c = 0.0;
        for (const auto& c : big)
            mean_c += static_cast<double>(c.perimeter) * static_cast<double>(c.perimeter) / static_cast<double>(c.area);
        mean_c /= static_cast<double>(big.size());
        return mean_c < 60.0 ? StoolClass::constipation : StoolClass::loose;
    }
    if (big.size() >= 2) return StoolClass::normal;
    const double c = static_cast<double>(big[0].perimeter) * static_cast<double>(big[0].perimeter) /
                     static_cast<double>(big[0].area);
    if (c < 55.0) return StoolClass::normal;
    if (c < 230.0) return StoolClass::constipation;
    return StoolClass::loose;
}

namespace synth_detail {

/// Builds the specimen geometry with initial sizes from the area budget.
inline Shape build_shape(const SpecimenSpec& spec, const SceneParams& sp, Rng& rng) {
    Shape shape;
    const double w = sp.image_w, h = sp.image_h;
    const double target_area = spec.coverage_ratio * w * h;
    const double rough = spec.boundary_roughness;

    auto place_blobs = [&](int count, double rough_amp, bool ragged) {
        const double per_area = target_area / count;
        std::vector<Blob> placed;
        for (int i = 0; i < count; ++i) {
            const double jitter = rng.uniform(0.85, 1.15);
            Blob b;
            b.r = std::sqrt(per_area / kPi) * jitter;
            if (ragged) {
                b.nharm = 3;
                b.amp = {rough_amp * 0.34, rough_amp * 0.25, rough_amp * 0.16};
                b.freq = {static_cast<int>(rng.range(4, 6)), static_cast<int>(rng.range(7, 9)),
                          static_cast<int>(rng.range(10, 12))};
            } else {
                b.nharm = 2;
                b.amp = {rough_amp * 0.65, rough_amp * 0.35};
                b.freq = {static_cast<int>(rng.range(2, 3)), static_cast<int>(rng.range(4, 5))};
            }
            for (int k = 0; k < b.nharm; ++k) b.phase[static_cast<size_t>(k)] = rng.uniform(0.0, 2.0 * kPi);
            // Placement margin allows the coverage loop to grow widths 1.45x.
            const double ext = b.max_extent() * 1.45 + 2.0;
            bool ok = false;
            for (int attempt = 0; attempt < 240 && !ok; ++attempt) {
                b.cx = rng.uniform(ext, w - ext);
                b.cy = rng.uniform(ext, h - ext);
                ok = true;
                for (const auto& other : placed) {
                    const double dx = b.cx - other.cx, dy = b.cy - other.cy;
                    const double min_d = ext + other.max_extent() * 1.45 + 1.0;
                    if (dx * dx + dy * dy < min_d * min_d) {
                        ok = false;
                        break;
                    }
                }
            }
            if (!ok) throw GenerationError("specimen generation: cannot place disjoint fragments at this coverage");
            placed.push_back(b);
        }
        shape.blobs = std::move(placed);
    };

    switch (spec.bss_level) {
        case 1:
            place_blobs(spec.fragment_count, rough, false);
            break;
        case 5:
            place_blobs(spec.fragment_count, rough, false);
            break;
        case 6:
            place_blobs(spec.fragment_count, rough, true);
            break;
        case 7: {
            // Diffuse splat: ragged outline plus many interior holes. The
            // holes buy most of the perimeter, which is what puts level 7's
            // perimeter^2/area above every other level.
            Blob b;
            b.r = std::sqrt(target_area / kPi) * 1.12;
            b.nharm = 3;
            b.amp = {rough * 0.22, rough * 0.16, rough * 0.12};
            b.freq = {static_cast<int>(rng.range(5, 6)), static_cast<int>(rng.range(7, 9)),
                      static_cast<int>(rng.range(10, 12))};
            for (int k = 0; k < 3; ++k) b.phase[static_cast<size_t>(k)] = rng.uniform(0.0, 2.0 * kPi);
            const double ext = b.max_extent() * 1.45 + 2.0;
            if (2.0 * ext >= std::min(w, h))
                throw GenerationError("specimen generation: level-7 splat does not fit at this coverage");
            b.cx = rng.uniform(ext, w - ext);
            b.cy = rng.uniform(ext, h - ext);
            shape.blobs.push_back(b);
            // Holes stay inside the guaranteed body (radius >= (1-0.5*rough)*r)
            // and clear of each other, so the region remains connected.
            const double safe = (1.0 - 0.5 * rough * 1.02) * b.r;
            const int nholes = static_cast<int>(rng.range(10, 14));
            std::vector<Blob> holes;
            for (int i = 0; i < nholes; ++i) {
                Blob hole;
                hole.r = b.r * rng.uniform(0.07, 0.11);
                bool ok = false;
                for (int attempt = 0; attempt < 60 && !ok; ++attempt) {
                    const double ang = rng.uniform(0.0, 2.0 * kPi);
                    const double rad = rng.uniform(0.0, 1.0) * (safe - hole.r * 1.3 - 1.5);
                    if (rad < 0.0) break;
                    hole.cx = b.cx + rad * std::cos(ang);
                    hole.cy = b.cy + rad * std::sin(ang);
                    ok = true;
                    for (const auto& other : holes) {
                        const double dx = hole.cx - other.cx, dy = hole.cy - other.cy;
                        const double min_d = (hole.r + other.r) * 1.3 + 1.2;
                        if (dx * dx + dy * dy < min_d * min_d) ok = false;
                    }
                }
                if (!ok) continue;  // keep however many fit
                hole.nharm = 1;
                hole.amp = {0.22};
                hole.freq = {static_cast<int>(rng.range(3, 5))};
                hole.phase = {rng.uniform(0.0, 2.0 * kPi)};
                holes.push_back(hole);
            }
            shape.holes = std::move(holes);
            break;
        }
        default: {  // 2, 3, 4: sausages
            Snake s;
            double r0 = std::sqrt(target_area / (4.0 * spec.elongation));
            double length = 2.0 * r0 * spec.elongation;
            const double max_len = 0.74 * std::min(w, h);
            if (length > max_len) {
                length = max_len;
                r0 = target_area / (2.0 * length);
            }
            s.r0 = r0;
            if (spec.bss_level == 2) {
                s.lump_amp = rough * 0.8;  // deep, slow bulges
                s.lump_freq = rng.uniform(4.0, 6.0);
            } else {
                s.lump_amp = rough * 0.25;
                s.lump_freq = rng.uniform(1.0, 2.0);
            }
            s.lump_phase = rng.uniform(0.0, 2.0 * kPi);
            const double alpha = rng.uniform(0.0, kPi);
            const double amp = length * rng.uniform(0.06, 0.13);
            const double omega = rng.uniform(0.6, 1.2);
            const double phi = rng.uniform(0.0, 2.0 * kPi);
            const double margin = s.r0 * (1.0 + s.lump_amp) * 1.5 + 2.0;
            const double cx = w * 0.5 + rng.uniform(-0.08, 0.08) * w;
            const double cy = h * 0.5 + rng.uniform(-0.08, 0.08) * h;
            const int npts = 48;
            for (int i = 0; i < npts; ++i) {
                const double t = static_cast<double>(i) / (npts - 1);
                const double u = (t - 0.5) * length;
                const double v = amp * std::sin(2.0 * kPi * omega * t + phi);
                double x = cx + u * std::cos(alpha) - v * std::sin(alpha);
                double y = cy + u * std::sin(alpha) + v * std::cos(alpha);
                x = std::clamp(x, margin, w - margin);
                y = std::clamp(y, margin, h - margin);
                s.pts.push_back({x, y});
            }
            shape.snakes.push_back(s);
            break;
        }
    }
    return shape;
}

}  // namespace synth_detail

/// Renders one specimen into an RGB scene plus the pixel-perfect binary mask
/// of its un-occluded pixels. Deterministic in (spec.seed, spec, scene).
inline Sample generate_specimen(const SpecimenSpec& spec, const SceneParams& scene) {
    using namespace synth_detail;
    spec.validate();
    scene.validate();
    const int w = scene.image_w, h = scene.image_h;
    Rng shape_rng(derive_seed(spec.seed, 1));
    Rng scene_rng(derive_seed(spec.seed, 2));
    const uint64_t noise_seed = derive_seed(spec.seed, 3);

    Shape shape = build_shape(spec, scene, shape_rng);
    ScenePlan plan = plan_scene(scene, scene_rng, noise_seed);

    // Coverage control: rescale widths until the pre-occlusion mask hits the
    // requested foreground fraction.
    std::vector<float> sdf(static_cast<size_t>(h) * w);
    auto rasterize = [&]() {
        size_t area = 0;
#pragma omp parallel for schedule(static) reduction(+ : area)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double s = shape.sdf(x + 0.5, y + 0.5);
                sdf[static_cast<size_t>(y) * w + x] = static_cast<float>(s);
                if (s < 0.0) ++area;
            }
        return area;
    };

    const double target = spec.coverage_ratio * w * h;
    size_t area = rasterize();
    double total_scale = 1.0;
    for (int iter = 0; iter < 6 && std::abs(static_cast<double>(area) - target) > 0.02 * w * h; ++iter) {
        if (area == 0) throw GenerationError("specimen generation: shape vanished during rescaling");
        double f = std::sqrt(target / static_cast<double>(area));
        f = std::clamp(f, 0.72, 1.38);
        f = std::min(f, 1.44 / total_scale);  // stay within the placement margin
        if (std::abs(f - 1.0) < 1e-3) break;
        shape.scale_widths(f);
        total_scale *= f;
        area = rasterize();
    }
    const double realized = static_cast<double>(area) / (w * h);
    if (std::abs(realized - spec.coverage_ratio) > 0.05)
        throw GenerationError("specimen generation: coverage " + std::to_string(realized) + " unreachable (target " +
                              std::to_string(spec.coverage_ratio) + ")");

    // Occluder strips: keep at least 20% of the specimen visible and never
    // drag the visible coverage below the 5-point tolerance band.
    std::vector<uint8_t> occluded(static_cast<size_t>(h) * w, 0);
    size_t covered = 0;
    const double min_visible = 0.2 * static_cast<double>(area);
    const double floor_area = (spec.coverage_ratio - 0.045) * w * h;
    for (int i = 0; i < scene.occluder_count; ++i) {
        for (int attempt = 0; attempt < 24; ++attempt) {
            Strip strip = sample_strip(scene, scene_rng);
            size_t newly = 0;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const size_t p = static_cast<size_t>(y) * w + x;
                    if (sdf[p] < 0.0f && !occluded[p] && strip.covers(x + 0.5, y + 0.5)) ++newly;
                }
            const double visible_after = static_cast<double>(area - covered - newly);
            if (visible_after >= min_visible && visible_after >= floor_area) {
                plan.strips.push_back(strip);
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x) {
                        const size_t p = static_cast<size_t>(y) * w + x;
                        if (strip.covers(x + 0.5, y + 0.5)) occluded[p] = 1;
                    }
                covered += newly;
                break;
            }
        }
    }

    // Paint.
    Sample out;
    out.image = ImageU8(h, w, 3);
    out.mask = MaskU8(h, w);
    ValueNoise noise{noise_seed};
    Rng color_rng(derive_seed(spec.seed, 4));
    const Rgb body = level_color(spec.bss_level, color_rng);
    const double soft = edge_softness(spec.bss_level);
    const double light_cx = std::cos(plan.light_dir), light_cy = std::sin(plan.light_dir);
    const double ref_r = std::max(2.0, std::sqrt(target / kPi) * 0.55);

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const size_t p = static_cast<size_t>(y) * w + x;
            const double px = x + 0.5, py = y + 0.5;
            Rgb c;
            // background
            if (scene.background == SceneParams::Background::flat) {
                c = plan.tile;
            } else {
                const double ex = (px - plan.bowl_cx) / plan.bowl_rx;
                const double ey = (py - plan.bowl_cy) / plan.bowl_ry;
                const double e = ex * ex + ey * ey;
                if (e > 1.0) {
                    c = plan.tile;
                } else if (e > plan.water_scale) {
                    const double rim = (e - plan.water_scale) / (1.0 - plan.water_scale);
                    const double shade = 1.0 - 0.18 * std::sin(rim * kPi);  // darker ring mid-rim
                    c = {plan.porcelain.r * shade, plan.porcelain.g * shade, plan.porcelain.b * shade};
                } else {
                    const double depth = 1.0 - e / plan.water_scale;
                    c = {plan.water.r - 6.0 * depth, plan.water.g - 4.0 * depth, plan.water.b - 2.0 * depth};
                }
            }
            // specimen
            const double s = sdf[p];
            const double alpha = std::clamp(0.5 - s / soft, 0.0, 1.0);
            if (alpha > 0.0) {
                const double depth = std::clamp(-s / ref_r, 0.0, 1.0);
                double shade = 0.72 + 0.38 * std::pow(depth, 0.7);
                shade *= 1.0 + 0.18 * (noise.at(px / w, py / h) - 0.5);
                Rgb sc = {body.r * shade, body.g * shade, body.b * shade};
                c = {c.r + (sc.r - c.r) * alpha, c.g + (sc.g - c.g) * alpha, c.b + (sc.b - c.b) * alpha};
            }
            // reflections wash over everything beneath
            for (const auto& rf : plan.reflections) {
                const double ca = std::cos(rf.angle), sa = std::sin(rf.angle);
                const double dx = px - rf.cx, dy = py - rf.cy;
                const double u = (dx * ca + dy * sa) / rf.rx, v = (-dx * sa + dy * ca) / rf.ry;
                const double d2 = u * u + v * v;
                if (d2 < 1.0) {
                    const double a = rf.alpha * (1.0 - d2) * (1.0 - d2);
                    c = {c.r + (252 - c.r) * a, c.g + (253 - c.g) * a, c.b + (255 - c.b) * a};
                }
            }
            // paper strips occlude and cast a soft shadow
            bool strip_covered = false;
            for (const auto& st : plan.strips) {
                const double sd = st.sdf(px, py);
                if (sd < 2.2 && sd >= 0.0 && st.sdf(px - 1.6, py - 1.6) < 0.0) {
                    c = {c.r * 0.85, c.g * 0.85, c.b * 0.85};  // drop shadow
                }
                const double a = std::clamp(0.5 - sd / 0.8, 0.0, 1.0);
                if (a > 0.0) {
                    const double band = 1.0 - 0.06 * noise.at(px / w + 0.37, py / h + 0.61);
                    Rgb stc = {244.0 * band, 241.0 * band, 233.0 * band};
                    c = {c.r + (stc.r - c.r) * a, c.g + (stc.g - c.g) * a, c.b + (stc.b - c.b) * a};
                }
                if (sd < 0.0) strip_covered = true;
            }
            // lighting gradient and sensor noise
            const double u01 = (px / w - 0.5) * light_cx + (py / h - 0.5) * light_cy;
            const double gain = 1.0 + scene.lighting_gradient * u01;
            const double nz = (hash_noise(noise_seed ^ 0xabcdef, p * 3 + 1) - 0.5) * 5.0;
            c = {c.r * gain + nz, c.g * gain + nz, c.b * gain + nz};

            out.image.at(y, x, 0) = static_cast<uint8_t>(std::clamp(c.r, 0.0, 255.0) + 0.5);
            out.image.at(y, x, 1) = static_cast<uint8_t>(std::clamp(c.g, 0.0, 255.0) + 0.5);
            out.image.at(y, x, 2) = static_cast<uint8_t>(std::clamp(c.b, 0.0, 255.0) + 0.5);
            out.mask.data[p] = (s < 0.0 && !strip_covered) ? 1 : 0;
        }
    }
    return out;
}

/// Scene without a specimen; the mask is identically zero.
inline Sample generate_negative(const SceneParams& scene, uint64_t seed) {
    using namespace synth_detail;
    scene.validate();
    const int w = scene.image_w, h = scene.image_h;
    Rng scene_rng(derive_seed(seed, 2));
    const uint64_t noise_seed = derive_seed(seed, 3);
    ScenePlan plan = plan_scene(scene, scene_rng, noise_seed);
    for (int i = 0; i < scene.occluder_count; ++i) plan.strips.push_back(sample_strip(scene, scene_rng));

    Sample out;
    out.image = ImageU8(h, w, 3);
    out.mask = MaskU8(h, w);
    ValueNoise noise{noise_seed};
    const double light_cx = std::cos(plan.light_dir), light_cy = std::sin(plan.light_dir);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const size_t p = static_cast<size_t>(y) * w + x;
            const double px = x + 0.5, py = y + 0.5;
            Rgb c;
            if (scene.background == SceneParams::Background::flat) {
                c = plan.tile;
            } else {
                const double ex = (px - plan.bowl_cx) / plan.bowl_rx;
                const double ey = (py - plan.bowl_cy) / plan.bowl_ry;
                const double e = ex * ex + ey * ey;
                if (e > 1.0) {
                    c = plan.tile;
                } else if (e > plan.water_scale) {
                    const double rim = (e - plan.water_scale) / (1.0 - plan.water_scale);
                    const double shade = 1.0 - 0.18 * std::sin(rim * kPi);
                    c = {plan.porcelain.r * shade, plan.porcelain.g * shade, plan.porcelain.b * shade};
                } else {
                    const double depth = 1.0 - e / plan.water_scale;
                    c = {plan.water.r - 6.0 * depth, plan.water.g - 4.0 * depth, plan.water.b - 2.0 * depth};
                }
            }
            for (const auto& rf : plan.reflections) {
                const double ca = std::cos(rf.angle), sa = std::sin(rf.angle);
                const double dx = px - rf.cx, dy = py - rf.cy;
                const double u = (dx * ca + dy * sa) / rf.rx, v = (-dx * sa + dy * ca) / rf.ry;
                const double d2 = u * u + v * v;
                if (d2 < 1.0) {
                    const double a = rf.alpha * (1.0 - d2) * (1.0 - d2);
                    c = {c.r + (252 - c.r) * a, c.g + (253 - c.g) * a, c.b + (255 - c.b) * a};
                }
            }
            for (const auto& st : plan.strips) {
                const double sd = st.sdf(px, py);
                if (sd < 2.2 && sd >= 0.0 && st.sdf(px - 1.6, py - 1.6) < 0.0) c = {c.r * 0.85, c.g * 0.85, c.b * 0.85};
                const double a = std::clamp(0.5 - sd / 0.8, 0.0, 1.0);
                if (a > 0.0) {
                    const double band = 1.0 - 0.06 * noise.at(px / w + 0.37, py / h + 0.61);
                    Rgb stc = {244.0 * band, 241.0 * band, 233.0 * band};
                    c = {c.r + (stc.r - c.r) * a, c.g + (stc.g - c.g) * a, c.b + (stc.b - c.b) * a};
                }
            }
            const double u01 = (px / w - 0.5) * light_cx + (py / h - 0.5) * light_cy;
            const double gain = 1.0 + scene.lighting_gradient * u01;
            const double nz = (hash_noise(noise_seed ^ 0xabcdef, p * 3 + 1) - 0.5) * 5.0;
            c = {c.r * gain + nz, c.g * gain + nz, c.b * gain + nz};
            out.image.at(y, x, 0) = static_cast<uint8_t>(std::clamp(c.r, 0.0, 255.0) + 0.5);
            out.image.at(y, x, 1) = static_cast<uint8_t>(std::clamp(c.g, 0.0, 255.0) + 0.5);
            out.image.at(y, x, 2) = static_cast<uint8_t>(std::clamp(c.b, 0.0, 255.0) + 0.5);
        }
    }
    return out;
}

}  // namespace bristolnet
