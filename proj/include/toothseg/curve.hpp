// Dental-arch reference curve: natural cubic spline through the (subsampled)
// medial-axis points, resampled at uniform arc length, linearly extrapolated
// along the end tangents, with consistently oriented unit normals.
#pragma once

#include "toothseg/types.hpp"

namespace toothseg {

struct ReferenceCurve {
    std::vector<Vec2> points;   // voxel units, arc-length order, N_s entries
    std::vector<Vec2> normals;  // unit perpendiculars, one per point
    double arc_spacing_mm = 0.0;
    int n_interp = 0;
    int n_extrap = 0;

    int size() const { return static_cast<int>(points.size()); }
};

namespace detail {

// Natural cubic spline through (t_i, y_i) with second derivatives solved by
// the Thomas algorithm.
struct NaturalSpline1 {
    std::vector<double> t, y, m;  // knots, values, second derivatives

    void fit(const std::vector<double>& knots, const std::vector<double>& values) {
        t = knots;
        y = values;
        const int n = static_cast<int>(t.size());
        m.assign(n, 0.0);
        if (n < 3) return;
        std::vector<double> a(n, 0.0), b(n, 0.0), c(n, 0.0), d(n, 0.0);
        for (int i = 1; i + 1 < n; ++i) {
            double h0 = t[i] - t[i - 1];
            double h1 = t[i + 1] - t[i];
            a[i] = h0;
            b[i] = 2.0 * (h0 + h1);
            c[i] = h1;
            d[i] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
        }
        // forward sweep on the interior rows (natural ends pin m[0], m[n-1])
        for (int i = 2; i + 1 < n; ++i) {
            double w = a[i] / b[i - 1];
            b[i] -= w * c[i - 1];
            d[i] -= w * d[i - 1];
        }
        for (int i = n - 2; i >= 1; --i)
            m[i] = (d[i] - c[i] * (i + 2 < n ? m[i + 1] : 0.0)) / b[i];
    }

    int segment_of(double x) const {
        int lo = 0, hi = static_cast<int>(t.size()) - 2;
        while (lo < hi) {
            int mid = (lo + hi + 1) / 2;
            if (t[mid] <= x) lo = mid;
            else hi = mid - 1;
        }
        return lo;
    }

    double eval(double x, int i) const {
        double h = t[i + 1] - t[i];
        double u = t[i + 1] - x, v = x - t[i];
        return m[i] * u * u * u / (6.0 * h) + m[i + 1] * v * v * v / (6.0 * h) +
               (y[i] / h - m[i] * h / 6.0) * u + (y[i + 1] / h - m[i + 1] * h / 6.0) * v;
    }

    double deriv(double x, int i) const {
        double h = t[i + 1] - t[i];
        double u = t[i + 1] - x, v = x - t[i];
        return -m[i] * u * u / (2.0 * h) + m[i + 1] * v * v / (2.0 * h) -
               (y[i] / h - m[i] * h / 6.0) + (y[i + 1] / h - m[i + 1] * h / 6.0);
    }
};

struct Spline2 {
    NaturalSpline1 sx, sy;

    Vec2 eval(double t) const {
        int i = sx.segment_of(t);
        return {sx.eval(t, i), sy.eval(t, i)};
    }
    Vec2 deriv(double t) const {
        int i = sx.segment_of(t);
        return {sx.deriv(t, i), sy.deriv(t, i)};
    }
};

// Keep roughly one control point every `spacing` along the chain; the first
// and last points are always kept.
inline std::vector<Vec2> subsample_chain(const std::vector<Vec2>& pts, double spacing) {
    std::vector<Vec2> out;
    out.push_back(pts.front());
    double since_last = 0.0;
    for (size_t i = 1; i < pts.size(); ++i) {
        double step = norm(pts[i] - pts[i - 1]);
        if (step <= 0.0) continue;
        since_last += step;
        if (since_last >= spacing) {
            out.push_back(pts[i]);
            since_last = 0.0;
        }
    }
    Vec2 last = pts.back();
    if (norm(out.back() - last) > 0.0) {
        if (norm(out.back() - last) < 0.5 * spacing && out.size() > 1)
            out.back() = last;
        else
            out.push_back(last);
    }
    return out;
}

inline bool segments_intersect(Vec2 p1, Vec2 p2, Vec2 q1, Vec2 q2) {
    auto cross = [](Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; };
    double d1 = cross(q2 - q1, p1 - q1);
    double d2 = cross(q2 - q1, p2 - q1);
    double d3 = cross(p2 - p1, q1 - p1);
    double d4 = cross(p2 - p1, q2 - p1);
    return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

}  // namespace detail

struct CurveFitOptions {
    double control_spacing_px = 3.0;  // chord spacing between spline control points
    double pixel_size_mm = 1.0;       // in-plane voxel size, for arc_spacing_mm
};

/// Fit the reference curve through an ordered skeleton path. The curve is a
/// natural cubic spline (chord-length parameterized) resampled to n_interp
/// points at uniform arc length, with n_extrap points appended at each end
/// by linear extrapolation along the end tangents; the total point count is
/// n_interp + 2*n_extrap. Normals are unit perpendiculars oriented away from
/// the centroid of the skeleton.
inline ReferenceCurve fit_reference_curve(const std::vector<Vec2>& skeleton, int n_interp = 500,
                                          int n_extrap = 70,
                                          const CurveFitOptions& opt = {}) {
    if (skeleton.size() < 4)
        throw Error(ErrorCode::invalid_argument, "curve fit needs at least 4 skeleton points");
    if (n_interp < 2 || n_extrap < 0)
        throw Error(ErrorCode::invalid_argument, "curve fit: bad sample counts");

    std::vector<Vec2> ctrl = detail::subsample_chain(skeleton, opt.control_spacing_px);
    if (ctrl.size() < 4) {
        ctrl.clear();
        for (const auto& p : skeleton)
            if (ctrl.empty() || norm(p - ctrl.back()) > 0.0) ctrl.push_back(p);
        if (ctrl.size() < 4)
            throw Error(ErrorCode::invalid_argument, "curve fit needs at least 4 distinct points");
    }

    std::vector<double> t(ctrl.size()), xs(ctrl.size()), ys(ctrl.size());
    t[0] = 0.0;
    for (size_t i = 0; i < ctrl.size(); ++i) {
        xs[i] = ctrl[i].x;
        ys[i] = ctrl[i].y;
        if (i > 0) {
            double step = norm(ctrl[i] - ctrl[i - 1]);
            if (step <= 0.0)
                throw Error(ErrorCode::invalid_argument, "curve fit: duplicate control points");
            t[i] = t[i - 1] + step;
        }
    }
    detail::Spline2 spline;
    spline.sx.fit(t, xs);
    spline.sy.fit(t, ys);

    // Dense parameter->arc-length table for uniform arc-length resampling.
    const int per_seg = 32;
    std::vector<double> tab_t, tab_len;
    tab_t.reserve((ctrl.size() - 1) * per_seg + 1);
    tab_t.push_back(0.0);
    tab_len.push_back(0.0);
    Vec2 prev = spline.eval(0.0);
    for (size_t i = 0; i + 1 < ctrl.size(); ++i) {
        for (int k = 1; k <= per_seg; ++k) {
            double tt = t[i] + (t[i + 1] - t[i]) * k / per_seg;
            Vec2 p = spline.eval(tt);
            tab_t.push_back(tt);
            tab_len.push_back(tab_len.back() + norm(p - prev));
            prev = p;
        }
    }
    const double total_len = tab_len.back();
    if (total_len <= 0.0)
        throw Error(ErrorCode::invalid_argument, "curve fit: degenerate skeleton");
    const double h = total_len / (n_interp - 1);

    ReferenceCurve curve;
    curve.n_interp = n_interp;
    curve.n_extrap = n_extrap;
    curve.arc_spacing_mm = h * opt.pixel_size_mm;
    curve.points.reserve(n_interp + 2 * n_extrap);
    curve.normals.reserve(n_interp + 2 * n_extrap);

    std::vector<Vec2> tangents(n_interp);
    size_t cursor = 0;
    for (int j = 0; j < n_interp; ++j) {
        double target = std::min(h * j, total_len);
        while (cursor + 1 < tab_len.size() && tab_len[cursor + 1] < target) ++cursor;
        double seg = tab_len[cursor + 1] - tab_len[cursor];
        double f = seg > 0.0 ? (target - tab_len[cursor]) / seg : 0.0;
        double tt = tab_t[cursor] + f * (tab_t[cursor + 1] - tab_t[cursor]);
        curve.points.push_back(spline.eval(tt));
        Vec2 d = spline.deriv(tt);
        double dn = norm(d);
        tangents[j] = dn > 0.0 ? (1.0 / dn) * d : Vec2{1.0, 0.0};
    }

    // One global normal orientation (rotate tangent by +90deg, flipped if
    // needed): flipping per point would break continuity. The sign is chosen
    // so normals point away from the arch centroid, i.e. toward the outer
    // side of the arch.
    Vec2 centroid{0.0, 0.0};
    for (const auto& p : skeleton) {
        centroid.x += p.x;
        centroid.y += p.y;
    }
    centroid = (1.0 / static_cast<double>(skeleton.size())) * centroid;
    double orient = 0.0;
    for (int j = 0; j < n_interp; ++j) {
        Vec2 n{-tangents[j].y, tangents[j].x};
        orient += dot(n, curve.points[j] - centroid);
    }
    double sign = orient >= 0.0 ? 1.0 : -1.0;
    for (int j = 0; j < n_interp; ++j)
        curve.normals.push_back({-sign * tangents[j].y, sign * tangents[j].x});

    if (n_extrap > 0) {
        Vec2 head = curve.points.front(), tail = curve.points.back();
        Vec2 th = tangents.front(), tt2 = tangents.back();
        std::vector<Vec2> pre(n_extrap), pre_n(n_extrap, curve.normals.front());
        for (int k = 1; k <= n_extrap; ++k)
            pre[n_extrap - k] = head - (k * h) * th;
        std::vector<Vec2> post(n_extrap);
        for (int k = 1; k <= n_extrap; ++k)
            post[k - 1] = tail + (k * h) * tt2;
        if (detail::segments_intersect(head, pre.front(), tail, post.back()))
            throw Error(ErrorCode::geometry_error,
                        "curve extrapolations intersect; skeleton ends bend inward");
        curve.points.insert(curve.points.begin(), pre.begin(), pre.end());
        curve.normals.insert(curve.normals.begin(), pre_n.begin(), pre_n.end());
        curve.points.insert(curve.points.end(), post.begin(), post.end());
        curve.normals.insert(curve.normals.end(), n_extrap, curve.normals.back());
    }
    return curve;
}

inline ReferenceCurve fit_reference_curve(const std::vector<PixelCoord>& skeleton,
                                          int n_interp = 500, int n_extrap = 70,
                                          const CurveFitOptions& opt = {}) {
    std::vector<Vec2> pts(skeleton.size());
    for (size_t i = 0; i < skeleton.size(); ++i)
        pts[i] = {static_cast<double>(skeleton[i].u), static_cast<double>(skeleton[i].v)};
    return fit_reference_curve(pts, n_interp, n_extrap, opt);
}

}  // namespace toothseg
