// Histogramming and Otsu thresholding (single- and two-level). Thresholds
// are maximizers of the between-class variance over all bin cuts, with ties
// broken toward the smallest cut indices; the selected bin indices are
// invariant under affine rescaling of the underlying intensities.
#pragma once

#include <limits>
#include <span>

#include "toothseg/types.hpp"

namespace toothseg {

struct Histogram {
    std::vector<uint64_t> counts;     // length B
    std::vector<double> bin_edges;    // length B+1, monotone

    int bins() const { return static_cast<int>(counts.size()); }
    uint64_t total() const {
        uint64_t t = 0;
        for (uint64_t c : counts) t += c;
        return t;
    }
    int nonempty_bins() const {
        int n = 0;
        for (uint64_t c : counts) n += (c != 0);
        return n;
    }
};

namespace detail {

inline Histogram histogram_of_values(std::span<const float> f32, std::span<const double> f64,
                                     int bins) {
    if (bins < 2) throw Error(ErrorCode::invalid_argument, "histogram needs at least 2 bins");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (float v : f32) {
        lo = std::min(lo, static_cast<double>(v));
        hi = std::max(hi, static_cast<double>(v));
    }
    for (double v : f64) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!(hi > lo))
        throw Error(ErrorCode::degenerate_data, "degenerate histogram: constant data");
    Histogram h;
    h.counts.assign(bins, 0);
    h.bin_edges.resize(bins + 1);
    double width = (hi - lo) / bins;
    for (int i = 0; i <= bins; ++i) h.bin_edges[i] = lo + width * i;
    h.bin_edges[bins] = hi;
    auto bin_of = [&](double v) {
        int b = static_cast<int>((v - lo) / (hi - lo) * bins);
        return std::clamp(b, 0, bins - 1);  // the maximum falls in the last bin
    };
    for (float v : f32) ++h.counts[bin_of(v)];
    for (double v : f64) ++h.counts[bin_of(v)];
    return h;
}

}  // namespace detail

/// Equal-width histogram spanning [min(v), max(v)]. Counts sum to the voxel
/// count. A constant volume has no usable range and is rejected.
inline Histogram histogram(const Volume3& v, int bins = 256) {
    return detail::histogram_of_values(v.data, {}, bins);
}

inline Histogram histogram(const Image2& img, int bins = 256) {
    return detail::histogram_of_values({}, img.data, bins);
}

namespace detail {

struct BinMoments {
    std::vector<double> cum_p;   // cum_p[i] = sum of p over bins < i
    std::vector<double> cum_ip;  // cum_ip[i] = sum of index*p over bins < i
    double mean_total = 0.0;
};

inline BinMoments bin_moments(const Histogram& h) {
    const int b = h.bins();
    const double total = static_cast<double>(h.total());
    BinMoments m;
    m.cum_p.assign(b + 1, 0.0);
    m.cum_ip.assign(b + 1, 0.0);
    for (int i = 0; i < b; ++i) {
        double p = h.counts[i] / total;
        m.cum_p[i + 1] = m.cum_p[i] + p;
        m.cum_ip[i + 1] = m.cum_ip[i] + i * p;
    }
    m.mean_total = m.cum_ip[b];
    return m;
}

// Between-class contribution of bins [a, b): w * (mu - mu_total)^2.
inline double class_term(const BinMoments& m, int a, int b) {
    double w = m.cum_p[b] - m.cum_p[a];
    if (w <= 0.0) return -1.0;  // empty class: mark cut invalid
    double mu = (m.cum_ip[b] - m.cum_ip[a]) / w;
    double d = mu - m.mean_total;
    return w * d * d;
}

}  // namespace detail

/// Two-level Otsu: thresholds (T0, T1), T0 < T1, maximizing the three-class
/// between-class variance over all bin-cut pairs. Returned thresholds are
/// the left edges of the first bin of each upper class, so `value >= T`
/// membership agrees with the selected bins.
inline std::pair<double, double> otsu_two_level(const Histogram& h) {
    const int b = h.bins();
    if (h.nonempty_bins() < 3)
        throw Error(ErrorCode::degenerate_data,
                    "otsu: not separable into three classes (<3 nonempty bins)");
    auto m = detail::bin_moments(h);
    double best = -1.0;
    int bk0 = -1, bk1 = -1;
    for (int k0 = 1; k0 + 1 < b; ++k0) {
        double t0 = detail::class_term(m, 0, k0);
        if (t0 < 0.0) continue;
        for (int k1 = k0 + 1; k1 < b; ++k1) {
            double t1 = detail::class_term(m, k0, k1);
            double t2 = detail::class_term(m, k1, b);
            if (t1 < 0.0 || t2 < 0.0) continue;
            double sigma = t0 + t1 + t2;
            if (sigma > best) {  // strict: ties keep the smallest (k0, k1)
                best = sigma;
                bk0 = k0;
                bk1 = k1;
            }
        }
    }
    if (bk0 < 0)
        throw Error(ErrorCode::degenerate_data, "otsu: no valid three-class cut");
    return {h.bin_edges[bk0], h.bin_edges[bk1]};
}

/// Selected cut indices, exposed for rescaling-invariance checks.
inline std::pair<int, int> otsu_two_level_bins(const Histogram& h) {
    auto [t0, t1] = otsu_two_level(h);
    int k0 = 0, k1 = 0;
    for (int i = 0; i <= h.bins(); ++i) {
        if (h.bin_edges[i] == t0) k0 = i;
        if (h.bin_edges[i] == t1) k1 = i;
    }
    return {k0, k1};
}

/// Single-threshold Otsu over the same cut convention.
inline double otsu_single(const Histogram& h) {
    const int b = h.bins();
    if (h.nonempty_bins() < 2)
        throw Error(ErrorCode::degenerate_data,
                    "otsu: not separable into two classes (<2 nonempty bins)");
    auto m = detail::bin_moments(h);
    double best = -1.0;
    int bk = -1;
    for (int k = 1; k < b; ++k) {
        double t0 = detail::class_term(m, 0, k);
        double t1 = detail::class_term(m, k, b);
        if (t0 < 0.0 || t1 < 0.0) continue;
        double sigma = t0 + t1;
        if (sigma > best) {
            best = sigma;
            bk = k;
        }
    }
    if (bk < 0) throw Error(ErrorCode::degenerate_data, "otsu: no valid cut");
    return h.bin_edges[bk];
}

inline int otsu_single_bin(const Histogram& h) {
    double t = otsu_single(h);
    for (int i = 0; i <= h.bins(); ++i)
        if (h.bin_edges[i] == t) return i;
    return 0;
}

/// Bone binarization: set exactly where the value reaches the bone
/// threshold T1.
inline BinaryVolume3 binarize_bone(const Volume3& v, double t1) {
    BinaryVolume3 out(v.dims);
    for (size_t i = 0; i < v.data.size(); ++i)
        out.data[i] = (v.data[i] >= t1) ? 1 : 0;
    return out;
}

inline BinaryImage2 binarize(const Image2& img, double t) {
    BinaryImage2 out(img.dims);
    for (size_t i = 0; i < img.data.size(); ++i)
        out.data[i] = (img.data[i] >= t) ? 1 : 0;
    return out;
}

}  // namespace toothseg
