#pragma once

// Vector Field Visualisation as a standalone SVG 1.1 document: Robinson map
// of the sphere, one marker per state colored by reconstructed purity, and an
// arrow from each programmed state to the direction of its reconstruction.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "qvfv/bloch.hpp"
#include "qvfv/errors.hpp"
#include "qvfv/robinson.hpp"
#include "qvfv/scan.hpp"

namespace qvfv {

struct Rgb {
    int r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};

namespace colormap {

// Seventeen evenly spaced samples of viridis.
inline constexpr std::array<Rgb, 17> kViridis{{{68, 1, 84},    {72, 24, 106},  {71, 45, 123},  {66, 64, 134},
                                               {59, 82, 139},  {51, 99, 141},  {44, 114, 142}, {38, 130, 142},
                                               {33, 145, 140}, {31, 160, 136}, {40, 174, 128}, {63, 188, 115},
                                               {94, 201, 98},  {132, 212, 75}, {173, 220, 48}, {216, 226, 25},
                                               {253, 231, 37}}};
inline constexpr std::array<Rgb, 2> kGray{{{20, 20, 20}, {235, 235, 235}}};

inline bool known(const std::string& name) { return name == "viridis" || name == "gray"; }

template <std::size_t N>
Rgb sample_table(const std::array<Rgb, N>& t, double u) {
    u = std::clamp(u, 0.0, 1.0) * (N - 1);
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(u), N - 2);
    const double f = u - static_cast<double>(i);
    auto mix = [f](int a, int b) { return static_cast<int>(std::lround(a + f * (b - a))); };
    return {mix(t[i].r, t[i + 1].r), mix(t[i].g, t[i + 1].g), mix(t[i].b, t[i + 1].b)};
}

// Color at u in [0, 1]; values outside are clamped.
inline Rgb sample(const std::string& name, double u) {
    if (name == "viridis") return sample_table(kViridis, u);
    if (name == "gray") return sample_table(kGray, u);
    throw InvalidArgument("unknown colormap '" + name + "'");
}

inline std::string hex(const Rgb& c) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
    return buf;
}

} // namespace colormap

struct VfvStyle {
    std::string colormap = "viridis";
    // Purity range of the color scale; unset bounds default to
    // [min purity - 0.005, 1].
    std::optional<double> range_low;
    std::optional<double> range_high;
    // Plane units per radian of angular error.
    double arrow_scale = 1.0;
    // Marker radius in plane units.
    double marker_radius = 0.08;
    bool show_mean_line = true;
    int width_px = 960;
    int height_px = 540;

    void validate() const {
        if (!colormap::known(colormap)) throw InvalidArgument("unknown colormap '" + colormap + "'");
        if (range_low && range_high && !(*range_low < *range_high)) {
            throw InvalidArgument("colormap range requires low < high");
        }
        if (!(arrow_scale > 0.0)) throw InvalidArgument("arrow_scale must be positive");
        if (!(marker_radius > 0.0)) throw InvalidArgument("marker_radius must be positive");
        if (width_px < 200 || height_px < 120) throw InvalidArgument("image must be at least 200x120 px");
    }

    bool operator==(const VfvStyle&) const = default;
};

// Fixed four-decimal formatting; negative zero prints as zero.
inline std::string fmt4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    std::string s = buf;
    if (s == "-0.0000") s = "0.0000";
    return s;
}

struct LegendBox {
    double x = 0.0, y = 0.0, width = 24.0, height = 300.0;
};

// Position of the mean line as a fraction of the bar height from the bottom.
inline double legend_mean_fraction(double mean, double low, double high) {
    if (!(low < high)) throw InvalidArgument("legend range requires low < high");
    if (mean < low || mean > high) throw InvalidArgument("mean purity outside the legend range");
    return (mean - low) / (high - low);
}

// Vertical gradient bar (low at the bottom) with five tick labels and an
// optional red line at the mean. Defines the id "purity-gradient".
inline std::string render_purity_legend(double mean, double low, double high, const std::string& cmap = "viridis",
                                        const LegendBox& box = {}, bool show_mean_line = true) {
    const double frac = legend_mean_fraction(mean, low, high);
    std::string s;
    s += "<g class=\"legend\">\n";
    s += "<defs>\n<linearGradient id=\"purity-gradient\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\">\n";
    for (int i = 0; i <= 16; ++i) {
        const double u = i / 16.0;
        s += "<stop offset=\"" + fmt4(u) + "\" stop-color=\"" + colormap::hex(colormap::sample(cmap, u)) + "\"/>\n";
    }
    s += "</linearGradient>\n</defs>\n";
    s += "<rect x=\"" + fmt4(box.x) + "\" y=\"" + fmt4(box.y) + "\" width=\"" + fmt4(box.width) + "\" height=\"" +
         fmt4(box.height) + "\" fill=\"url(#purity-gradient)\" stroke=\"#333333\" stroke-width=\"0.5000\"/>\n";
    const double bottom = box.y + box.height;
    for (int i = 0; i <= 4; ++i) {
        const double u = i / 4.0;
        const double ty = bottom - u * box.height;
        s += "<line x1=\"" + fmt4(box.x + box.width) + "\" y1=\"" + fmt4(ty) + "\" x2=\"" +
             fmt4(box.x + box.width + 4.0) + "\" y2=\"" + fmt4(ty) + "\" stroke=\"#333333\" stroke-width=\"0.5000\"/>\n";
        s += "<text x=\"" + fmt4(box.x + box.width + 6.0) + "\" y=\"" + fmt4(ty + 3.5) +
             "\" font-family=\"sans-serif\" font-size=\"10\">" + fmt4(low + u * (high - low)) + "</text>\n";
    }
    if (show_mean_line) {
        const double my = bottom - frac * box.height;
        s += "<line class=\"mean-line\" x1=\"" + fmt4(box.x - 3.0) + "\" y1=\"" + fmt4(my) + "\" x2=\"" +
             fmt4(box.x + box.width + 3.0) + "\" y2=\"" + fmt4(my) + "\" stroke=\"#ff0000\" stroke-width=\"2.0000\"/>\n";
    }
    s += "<text x=\"" + fmt4(box.x) + "\" y=\"" + fmt4(box.y - 8.0) +
         "\" font-family=\"sans-serif\" font-size=\"11\">purity</text>\n";
    s += "</g>\n";
    return s;
}

struct VfvRender {
    std::string svg;
    std::vector<std::string> warnings;
    int markers = 0;
    int arrows = 0;
    int suppressed = 0;
    double range_low = 0.0;
    double range_high = 1.0;
    double mean_purity = 0.0;
};

namespace detail {

// Maps plane coordinates to pixels; y grows downward in SVG.
struct Viewport {
    double cx = 0.0, cy = 0.0, scale = 1.0;

    std::pair<double, double> px(const PlanePoint& p) const { return {cx + p.x * scale, cy - p.y * scale}; }
};

inline std::string polyline(const Viewport& vp, const std::vector<GeoPoint>& pts) {
    std::string s;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto [x, y] = vp.px(robinson_project(pts[i]));
        if (i) s += ' ';
        s += fmt4(x) + "," + fmt4(y);
    }
    return s;
}

inline std::string segment(const std::pair<double, double>& a, const std::pair<double, double>& b, bool head) {
    std::string s = "<line x1=\"" + fmt4(a.first) + "\" y1=\"" + fmt4(a.second) + "\" x2=\"" + fmt4(b.first) +
                    "\" y2=\"" + fmt4(b.second) + "\"";
    if (head) s += " marker-end=\"url(#arrowhead)\"";
    return s + "/>\n";
}

} // namespace detail

// Arrow segments in plane coordinates from a programmed state toward the
// direction of its reconstruction, scaled in (latitude, longitude) so that
// a scale of 1 ends exactly on the projected reconstruction. Arrows crossing
// the antimeridian are split at the seam.
inline std::vector<std::pair<PlanePoint, PlanePoint>> arrow_segments(const GeoPoint& from, const GeoPoint& to,
                                                                     double scale) {
    double dlon = to.longitude - from.longitude;
    if (dlon > 180.0) dlon -= 360.0;
    if (dlon < -180.0) dlon += 360.0;
    const double dlat = to.latitude - from.latitude;
    double end_lon = from.longitude + std::clamp(scale * dlon, -359.0, 359.0);
    const double end_lat = std::clamp(from.latitude + scale * dlat, -90.0, 90.0);
    const PlanePoint start = robinson_project(from);
    if (end_lon >= -180.0 && end_lon <= 180.0) return {{start, robinson_project({end_lat, end_lon})}};
    const double seam = end_lon > 180.0 ? 180.0 : -180.0;
    const double f = (seam - from.longitude) / (end_lon - from.longitude);
    const double cross_lat = from.latitude + f * (end_lat - from.latitude);
    end_lon -= 2.0 * seam;
    return {{start, robinson_project({cross_lat, seam})},
            {robinson_project({cross_lat, -seam}), robinson_project({end_lat, end_lon})}};
}

// Angle in radians between a programmed state and the direction of a
// reconstruction.
inline double angular_error(const BlochVector& a_in, const BlochVector& a_out) {
    const double c = dot(a_in, a_out) / (norm(a_in) * norm(a_out));
    return std::acos(std::clamp(c, -1.0, 1.0));
}

inline constexpr double kDegenerateNorm = 1e-9;

inline VfvRender render_vfv(const ScanResult& scan, const VfvStyle& style = {}) {
    style.validate();
    VfvRender out;

    std::vector<std::size_t> used;
    double min_p = 1.0;
    double sum_p = 0.0;
    for (std::size_t i = 0; i < scan.rows.size(); ++i) {
        const ScanRow& row = scan.rows[i];
        if (row.failed() || !row.primary()) continue;
        used.push_back(i);
        min_p = std::min(min_p, row.purity);
        sum_p += row.purity;
    }
    if (used.empty()) throw EmptyScan("scan has no successful rows to render");
    out.mean_purity = sum_p / static_cast<double>(used.size());
    out.range_low = style.range_low.value_or(min_p - 0.005);
    out.range_high = style.range_high.value_or(1.0);
    if (!(out.range_low < out.range_high)) throw InvalidArgument("colormap range requires low < high");
    double legend_mean = out.mean_purity;
    if (legend_mean < out.range_low || legend_mean > out.range_high) {
        out.warnings.push_back("mean purity " + fmt4(legend_mean) + " lies outside the color range; line clamped");
        legend_mean = std::clamp(legend_mean, out.range_low, out.range_high);
    }

    const double W = style.width_px;
    const double H = style.height_px;
    constexpr double margin = 20.0;
    constexpr double legend_w = 110.0;
    const double map_w = W - legend_w - 2.0 * margin;
    const double map_h = H - 2.0 * margin;
    detail::Viewport vp;
    vp.scale = std::min(map_w / (2.0 * robinson::max_x), map_h / (2.0 * robinson::max_y));
    vp.cx = margin + map_w / 2.0;
    vp.cy = H / 2.0;

    std::string s;
    s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + std::to_string(style.width_px) +
         "\" height=\"" + std::to_string(style.height_px) + "\" viewBox=\"0 0 " + std::to_string(style.width_px) +
         " " + std::to_string(style.height_px) + "\">\n";
    s += "<defs>\n<marker id=\"arrowhead\" viewBox=\"0 0 10 10\" refX=\"9\" refY=\"5\" markerWidth=\"5\" "
         "markerHeight=\"5\" orient=\"auto\">\n<path d=\"M0,0 L10,5 L0,10 z\" fill=\"#000000\"/>\n</marker>\n</defs>\n";
    s += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(style.width_px) + "\" height=\"" +
         std::to_string(style.height_px) + "\" fill=\"#ffffff\"/>\n";

    // Outline: eastern edge south to north, western edge north to south.
    std::vector<GeoPoint> edge;
    for (int lat = -90; lat <= 90; lat += 5) edge.push_back({double(lat), 180.0});
    for (int lat = 90; lat >= -90; lat -= 5) edge.push_back({double(lat), -180.0});
    s += "<polygon class=\"outline\" points=\"" + detail::polyline(vp, edge) +
         "\" fill=\"#f4f4f4\" stroke=\"#333333\" stroke-width=\"1.0000\"/>\n";

    s += "<g class=\"graticule\" fill=\"none\" stroke=\"#bbbbbb\" stroke-width=\"0.5000\">\n";
    for (int lat = -60; lat <= 60; lat += 30) {
        s += "<polyline points=\"" + detail::polyline(vp, {{double(lat), -180.0}, {double(lat), 180.0}}) + "\"/>\n";
    }
    for (int lon = -120; lon <= 120; lon += 60) {
        std::vector<GeoPoint> m;
        for (int lat = -90; lat <= 90; lat += 5) m.push_back({double(lat), double(lon)});
        s += "<polyline points=\"" + detail::polyline(vp, m) + "\"/>\n";
    }
    s += "</g>\n";

    const double r_px = style.marker_radius * vp.scale;
    std::string markers = "<g class=\"markers\" stroke=\"#333333\" stroke-width=\"0.3000\">\n";
    std::string arrows = "<g class=\"arrows\" stroke=\"#000000\" stroke-width=\"1.2000\" fill=\"none\">\n";
    for (std::size_t i : used) {
        const ScanRow& row = scan.rows[i];
        if (!row.a_in) {
            out.warnings.push_back("row " + std::to_string(i) + " has no programmed state and is not drawn");
            continue;
        }
        const GeoPoint g_in = to_geo(*row.a_in);
        const auto c = vp.px(robinson_project(g_in));
        const double u = (row.purity - out.range_low) / (out.range_high - out.range_low);
        markers += "<circle cx=\"" + fmt4(c.first) + "\" cy=\"" + fmt4(c.second) + "\" r=\"" + fmt4(r_px) +
                   "\" fill=\"" + colormap::hex(colormap::sample(style.colormap, u)) + "\"/>\n";
        ++out.markers;

        const BlochVector a_out = row.primary()->estimate;
        if (norm(a_out) < kDegenerateNorm) {
            out.warnings.push_back("DegenerateDirection: row " + std::to_string(i) +
                                   " has a reconstruction of norm below 1e-9; arrow suppressed");
            ++out.suppressed;
            continue;
        }
        if (style.arrow_scale * angular_error(*row.a_in, a_out) < 0.5 * style.marker_radius) {
            ++out.suppressed;
            continue;
        }
        const auto segs = arrow_segments(g_in, to_geo(a_out), style.arrow_scale);
        arrows += "<g class=\"arrow\">\n";
        for (std::size_t k = 0; k < segs.size(); ++k) {
            // The first segment starts at the marker center computed above.
            const auto a = k == 0 ? c : vp.px(segs[k].first);
            arrows += detail::segment(a, vp.px(segs[k].second), k + 1 == segs.size());
        }
        arrows += "</g>\n";
        ++out.arrows;
    }
    s += markers + "</g>\n";
    s += arrows + "</g>\n";

    LegendBox box;
    box.x = W - legend_w + 15.0;
    box.height = std::min(300.0, H - 80.0);
    box.y = (H - box.height) / 2.0;
    s += render_purity_legend(legend_mean, out.range_low, out.range_high, style.colormap, box, style.show_mean_line);
    s += "<text x=\"" + fmt4(box.x) + "\" y=\"" + fmt4(box.y + box.height + 20.0) +
         "\" font-family=\"sans-serif\" font-size=\"10\">mean " + fmt4(out.mean_purity) + "</text>\n";
    s += "</svg>\n";
    out.svg = std::move(s);
    return out;
}

} // namespace qvfv
