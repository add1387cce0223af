// Grid-cell detection model and post-processing: box encoding/decoding
// against an anchor, score fusion, greedy NMS, and the detection and mask
// cross-entropy losses as pure functions.
#pragma once

#include <json.hpp>

#include "toothseg/types.hpp"

namespace toothseg {

enum class ToothClass : int { incisor = 1, canine = 2, premolar = 3, molar = 4 };

inline const char* tooth_class_name(ToothClass c) {
    switch (c) {
        case ToothClass::incisor: return "incisor";
        case ToothClass::canine: return "canine";
        case ToothClass::premolar: return "premolar";
        case ToothClass::molar: return "molar";
    }
    return "unknown";
}

inline ToothClass tooth_class_from_name(const std::string& s) {
    if (s == "incisor") return ToothClass::incisor;
    if (s == "canine") return ToothClass::canine;
    if (s == "premolar") return ToothClass::premolar;
    if (s == "molar") return ToothClass::molar;
    throw Error(ErrorCode::format_error, "unknown tooth class '" + s + "'");
}

/// Axis-aligned box in panorama pixels, stored as center and extent.
struct PanoBox {
    double s = 0.0;  // center along the curve axis
    double z = 0.0;  // center along the slice axis
    double w = 0.0;
    double h = 0.0;
};

/// One grid cell's prediction: confidence, encoded box, class probabilities.
struct CellPrediction {
    double c = 0.0;
    std::array<double, 4> b{0.0, 0.0, 0.0, 0.0};
    std::array<double, 4> p{0.0, 0.0, 0.0, 0.0};

    void validate() const {
        if (!(c >= 0.0 && c <= 1.0))
            throw Error(ErrorCode::provider_error, "cell confidence outside [0,1]");
        double sum = 0.0;
        for (double pk : p) {
            if (pk < 0.0)
                throw Error(ErrorCode::provider_error, "negative class probability");
            sum += pk;
        }
        if (std::abs(sum - 1.0) > 1e-6)
            throw Error(ErrorCode::provider_error, "class probabilities must sum to 1");
    }
};

/// Detection map over a panorama divided into g x g cells. Cell indices
/// (i, j) are 1-based, i along s and j along z, matching the box encoding.
struct DetectionGrid {
    int cells_s = 0;
    int cells_z = 0;
    int g = 16;
    double anchor_w = 32.0;
    double anchor_h = 64.0;
    std::vector<CellPrediction> cells;  // row-major: index (j-1)*cells_s + (i-1)

    static DetectionGrid make(int pano_w, int pano_h, int g, double aw, double ah) {
        if (g <= 0 || pano_w % g != 0 || pano_h % g != 0)
            throw Error(ErrorCode::invalid_argument,
                        "panorama dims must be divisible by the cell size g");
        if (aw <= 0 || ah <= 0)
            throw Error(ErrorCode::invalid_argument, "anchor extents must be positive");
        DetectionGrid grid;
        grid.cells_s = pano_w / g;
        grid.cells_z = pano_h / g;
        grid.g = g;
        grid.anchor_w = aw;
        grid.anchor_h = ah;
        grid.cells.resize(static_cast<size_t>(grid.cells_s) * grid.cells_z);
        return grid;
    }

    size_t index(int i, int j) const {
        return static_cast<size_t>(j - 1) * cells_s + (i - 1);
    }
    CellPrediction& at(int i, int j) { return cells[index(i, j)]; }
    const CellPrediction& at(int i, int j) const { return cells[index(i, j)]; }

    /// 1-based cell containing a panorama point.
    std::pair<int, int> cell_of(double s, double z) const {
        int i = std::clamp(static_cast<int>(s / g) + 1, 1, cells_s);
        int j = std::clamp(static_cast<int>(z / g) + 1, 1, cells_z);
        return {i, j};
    }
};

/// One decoded tooth detection.
struct Detection {
    PanoBox box;
    double score = 0.0;  // e = c * max_k p_k
    ToothClass class_id = ToothClass::incisor;
    int cell_i = 0;  // 1-based
    int cell_j = 0;
};

/// Encode a box against its grid cell and the anchor:
/// b = (s/g - (i-1), z/g - (j-1), log(w/a_w), log(h/a_h)).
inline std::array<double, 4> encode_box(const PanoBox& box, std::pair<int, int> cell, int g,
                                        double anchor_w, double anchor_h) {
    if (box.w <= 0.0 || box.h <= 0.0)
        throw Error(ErrorCode::invalid_argument, "encode_box: box extents must be positive");
    if (anchor_w <= 0.0 || anchor_h <= 0.0)
        throw Error(ErrorCode::invalid_argument, "encode_box: anchors must be positive");
    auto [i, j] = cell;
    return {box.s / g - (i - 1), box.z / g - (j - 1), std::log(box.w / anchor_w),
            std::log(box.h / anchor_h)};
}

/// Exact inverse of encode_box.
inline PanoBox decode_box(const std::array<double, 4>& b, std::pair<int, int> cell, int g,
                          double anchor_w, double anchor_h) {
    if (anchor_w <= 0.0 || anchor_h <= 0.0)
        throw Error(ErrorCode::invalid_argument, "decode_box: anchors must be positive");
    auto [i, j] = cell;
    PanoBox box;
    box.s = (b[0] + (i - 1)) * g;
    box.z = (b[1] + (j - 1)) * g;
    box.w = anchor_w * std::exp(b[2]);
    box.h = anchor_h * std::exp(b[3]);
    return box;
}

/// Intersection over union of two axis-aligned boxes.
inline double iou(const PanoBox& a, const PanoBox& b) {
    if (a.w <= 0 || a.h <= 0 || b.w <= 0 || b.h <= 0)
        throw Error(ErrorCode::invalid_argument, "iou: box extents must be positive");
    double ix = std::max(0.0, std::min(a.s + a.w / 2, b.s + b.w / 2) -
                                  std::max(a.s - a.w / 2, b.s - b.w / 2));
    double iz = std::max(0.0, std::min(a.z + a.h / 2, b.z + b.h / 2) -
                                  std::max(a.z - a.h / 2, b.z - b.h / 2));
    double inter = ix * iz;
    double uni = a.w * a.h + b.w * b.h - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

/// Decode every cell, drop scores below score_thresh, then greedy NMS:
/// repeatedly keep the highest-scoring box and discard remaining boxes whose
/// IoU with it exceeds iou_thresh. Ties are broken by (score desc, cell
/// row-major), so the output is deterministic.
inline std::vector<Detection> select_detections(const DetectionGrid& grid,
                                                double score_thresh = 0.5,
                                                double iou_thresh = 0.6) {
    if (score_thresh < 0 || score_thresh > 1 || iou_thresh < 0 || iou_thresh > 1)
        throw Error(ErrorCode::invalid_argument, "thresholds must lie in [0,1]");
    std::vector<Detection> pool;
    for (int j = 1; j <= grid.cells_z; ++j) {
        for (int i = 1; i <= grid.cells_s; ++i) {
            const CellPrediction& cell = grid.at(i, j);
            int best_k = 0;
            for (int k = 1; k < 4; ++k)
                if (cell.p[k] > cell.p[best_k]) best_k = k;
            double score = cell.c * cell.p[best_k];
            if (score < score_thresh) continue;
            Detection det;
            det.box = decode_box(cell.b, {i, j}, grid.g, grid.anchor_w, grid.anchor_h);
            det.score = score;
            det.class_id = static_cast<ToothClass>(best_k + 1);
            det.cell_i = i;
            det.cell_j = j;
            pool.push_back(det);
        }
    }
    std::stable_sort(pool.begin(), pool.end(), [](const Detection& a, const Detection& b) {
        return a.score > b.score;  // stable: equal scores stay in row-major order
    });
    std::vector<Detection> kept;
    std::vector<bool> suppressed(pool.size(), false);
    for (size_t i = 0; i < pool.size(); ++i) {
        if (suppressed[i]) continue;
        kept.push_back(pool[i]);
        for (size_t j = i + 1; j < pool.size(); ++j)
            if (!suppressed[j] && iou(pool[i].box, pool[j].box) > iou_thresh)
                suppressed[j] = true;
    }
    return kept;
}

/// Per-sample multi-task detection loss:
///   sum_{O1} (1-c)^2 + l1 * sum_{O0} c^2 + l2 * sum_{O1} |b*-b|^2
///   + sum_{O1} CE(p*, p)
/// where O1/O0 are the cells with truth confidence 1/0 and CE uses natural
/// log with eps clamping.
inline double detection_loss(const DetectionGrid& pred, const DetectionGrid& truth,
                             double lambda1 = 0.1, double lambda2 = 5.0, double eps = 1e-12) {
    if (pred.cells_s != truth.cells_s || pred.cells_z != truth.cells_z)
        throw Error(ErrorCode::invalid_argument, "detection_loss: grid shapes differ");
    double loss = 0.0;
    for (size_t k = 0; k < truth.cells.size(); ++k) {
        const CellPrediction& t = truth.cells[k];
        const CellPrediction& y = pred.cells[k];
        if (t.c == 0.0) {
            loss += lambda1 * y.c * y.c;
        } else if (t.c == 1.0) {
            double dc = 1.0 - y.c;
            loss += dc * dc;
            double db = 0.0;
            for (int m = 0; m < 4; ++m) {
                double d = t.b[m] - y.b[m];
                db += d * d;
            }
            loss += lambda2 * db;
            for (int m = 0; m < 4; ++m)
                if (t.p[m] > 0.0) loss -= t.p[m] * std::log(std::max(y.p[m], eps));
        } else {
            throw Error(ErrorCode::invalid_argument,
                        "detection_loss: truth confidence must be 0 or 1");
        }
    }
    return loss;
}

/// Per-sample 2D mask cross entropy: -(1/M) sum_x Y(x) log f(x). Predictions
/// of exactly 0 under a positive label are clamped at eps; the number of
/// clamped pixels is reported through `clamped` when given.
inline double mask_ce_loss_2d(const Image2& pred, const BinaryImage2& truth, double eps = 1e-12,
                              size_t* clamped = nullptr) {
    if (pred.dims != truth.dims)
        throw Error(ErrorCode::invalid_argument, "mask loss: image dims differ");
    double acc = 0.0;
    size_t n_clamped = 0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        if (!truth.data[i]) continue;
        double f = pred.data[i];
        if (f < 0.0 || f > 1.0)
            throw Error(ErrorCode::invalid_argument, "mask loss: prediction outside [0,1]");
        if (f < eps) {
            f = eps;
            ++n_clamped;
        }
        acc -= std::log(f);
    }
    if (clamped) *clamped = n_clamped;
    return acc / static_cast<double>(pred.data.size());
}

/// 3D variant of the mask cross entropy over voxels.
inline double mask_ce_loss_3d(const Volume3& pred, const BinaryVolume3& truth, double eps = 1e-12,
                              size_t* clamped = nullptr) {
    if (pred.dims != truth.dims)
        throw Error(ErrorCode::invalid_argument, "mask loss: volume dims differ");
    double acc = 0.0;
    size_t n_clamped = 0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        if (!truth.data[i]) continue;
        double f = pred.data[i];
        if (f < 0.0 || f > 1.0)
            throw Error(ErrorCode::invalid_argument, "mask loss: prediction outside [0,1]");
        if (f < eps) {
            f = eps;
            ++n_clamped;
        }
        acc -= std::log(f);
    }
    if (clamped) *clamped = n_clamped;
    return acc / static_cast<double>(pred.data.size());
}

// --- JSON formats ----------------------------------------------------------

inline nlohmann::json detections_to_json(const std::vector<Detection>& dets) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& d : dets)
        arr.push_back({{"box", {d.box.s, d.box.z, d.box.w, d.box.h}},
                       {"score", d.score},
                       {"class", tooth_class_name(d.class_id)},
                       {"cell", {d.cell_i, d.cell_j}}});
    return arr;
}

inline std::vector<Detection> detections_from_json(const nlohmann::json& arr) {
    if (!arr.is_array())
        throw Error(ErrorCode::format_error, "detections JSON must be an array");
    std::vector<Detection> dets;
    for (const auto& j : arr) {
        Detection d;
        try {
            auto box = j.at("box");
            d.box = {box.at(0).get<double>(), box.at(1).get<double>(), box.at(2).get<double>(),
                     box.at(3).get<double>()};
            d.score = j.at("score").get<double>();
            d.class_id = tooth_class_from_name(j.at("class").get<std::string>());
            if (j.contains("cell")) {
                d.cell_i = j["cell"].at(0).get<int>();
                d.cell_j = j["cell"].at(1).get<int>();
            }
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::format_error, std::string("bad detection JSON: ") + e.what());
        }
        if (!(d.score >= 0.0 && d.score <= 1.0))
            throw Error(ErrorCode::provider_error, "detection score outside [0,1]");
        if (d.box.w <= 0.0 || d.box.h <= 0.0)
            throw Error(ErrorCode::provider_error, "detection box extents must be positive");
        dets.push_back(d);
    }
    return dets;
}

inline nlohmann::json grid_to_json(const DetectionGrid& grid) {
    nlohmann::json cells = nlohmann::json::array();
    for (int j = 1; j <= grid.cells_z; ++j)
        for (int i = 1; i <= grid.cells_s; ++i) {
            const CellPrediction& c = grid.at(i, j);
            if (c.c == 0.0) continue;  // sparse: omitted cells carry zero confidence
            cells.push_back({{"cell", {i, j}}, {"c", c.c}, {"b", c.b}, {"p", c.p}});
        }
    return {{"g", grid.g},
            {"anchor", {grid.anchor_w, grid.anchor_h}},
            {"cells_s", grid.cells_s},
            {"cells_z", grid.cells_z},
            {"cells", cells}};
}

inline DetectionGrid grid_from_json(const nlohmann::json& j) {
    DetectionGrid grid;
    try {
        grid.g = j.at("g").get<int>();
        grid.anchor_w = j.at("anchor").at(0).get<double>();
        grid.anchor_h = j.at("anchor").at(1).get<double>();
        grid.cells_s = j.at("cells_s").get<int>();
        grid.cells_z = j.at("cells_z").get<int>();
        if (grid.g <= 0 || grid.cells_s <= 0 || grid.cells_z <= 0)
            throw Error(ErrorCode::format_error, "grid JSON: bad shape");
        grid.cells.resize(static_cast<size_t>(grid.cells_s) * grid.cells_z);
        for (const auto& cj : j.at("cells")) {
            int i = cj.at("cell").at(0).get<int>();
            int jj = cj.at("cell").at(1).get<int>();
            if (i < 1 || i > grid.cells_s || jj < 1 || jj > grid.cells_z)
                throw Error(ErrorCode::format_error, "grid JSON: cell index out of range");
            CellPrediction& c = grid.at(i, jj);
            c.c = cj.at("c").get<double>();
            for (int m = 0; m < 4; ++m) c.b[m] = cj.at("b").at(m).get<double>();
            for (int m = 0; m < 4; ++m) c.p[m] = cj.at("p").at(m).get<double>();
            c.validate();
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::format_error, std::string("bad grid JSON: ") + e.what());
    }
    return grid;
}

}  // namespace toothseg
