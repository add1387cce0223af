// FDI tooth numbering from classified detections. Detections are sorted
// along the curve axis, quadrants split at the middle of the four sequential
// incisors, and numbers assigned from the inside out per class group. The
// gap-tolerant variant withholds numbers wherever a missing tooth makes the
// assignment ambiguous.
#pragma once

#include <json.hpp>
#include <optional>

#include "toothseg/detection.hpp"
#include "toothseg/types.hpp"

namespace toothseg {

struct ToothID {
    Jaw jaw = Jaw::upper;
    int quadrant = 0;                 // FDI quadrant 1..4
    std::optional<int> number;        // 1..8, or none when ambiguous
    ToothClass class_id = ToothClass::incisor;

    std::optional<int> fdi() const {
        if (!number) return std::nullopt;
        return 10 * quadrant + *number;
    }
};

struct IdentifiedTooth {
    Detection detection;
    ToothID id;
};

struct IdentificationResult {
    std::vector<IdentifiedTooth> teeth;  // ordered by ascending box center s
    std::vector<std::string> warnings;
};

namespace detail {

inline int fdi_capacity(ToothClass c) {
    switch (c) {
        case ToothClass::incisor: return 2;
        case ToothClass::canine: return 1;
        case ToothClass::premolar: return 2;
        case ToothClass::molar: return 3;
    }
    return 0;
}

inline int first_number(ToothClass c) {
    switch (c) {
        case ToothClass::incisor: return 1;
        case ToothClass::canine: return 3;
        case ToothClass::premolar: return 4;
        case ToothClass::molar: return 6;
    }
    return 0;
}

struct SplitResult {
    double split = 0.0;
    bool run_of_four = false;
};

// Locate the maximal run of consecutive incisors in s-order; a run of four
// defines the quadrant split at the midpoint between its 2nd and 3rd boxes.
inline SplitResult quadrant_split(const std::vector<Detection>& sorted, double midline_fallback,
                                  std::vector<std::string>& warnings) {
    int best_start = -1, best_len = 0, run_start = -1, run_len = 0;
    for (size_t k = 0; k <= sorted.size(); ++k) {
        bool incisor = k < sorted.size() && sorted[k].class_id == ToothClass::incisor;
        if (incisor) {
            if (run_len == 0) run_start = static_cast<int>(k);
            ++run_len;
        } else {
            if (run_len > best_len) {
                best_len = run_len;
                best_start = run_start;
            }
            run_len = 0;
        }
    }
    SplitResult r;
    if (best_len == 4) {
        r.run_of_four = true;
        r.split = 0.5 * (sorted[best_start + 1].box.s + sorted[best_start + 2].box.s);
        return r;
    }
    warnings.push_back("incisor run of " + std::to_string(best_len) +
                       " (expected 4); falling back to the detection midline");
    if (sorted.size() >= 2 && sorted.front().box.s < sorted.back().box.s)
        r.split = 0.5 * (sorted.front().box.s + sorted.back().box.s);
    else
        r.split = midline_fallback;
    return r;
}

// Quadrant mapping with patient-left at higher s: upper right=1 / left=2,
// lower right=4 / left=3. flip_sides swaps the mapping for mirrored scans.
inline int quadrant_for(Jaw jaw, bool left_side, bool flip_sides) {
    if (flip_sides) left_side = !left_side;
    if (jaw == Jaw::upper) return left_side ? 2 : 1;
    return left_side ? 3 : 4;
}

struct QuadrantGroups {
    // per quadrant: detections of each class ordered inside -> outside
    std::array<std::array<std::vector<size_t>, 5>, 5> by_class{};
};

inline QuadrantGroups group_by_quadrant(const std::vector<Detection>& sorted, Jaw jaw,
                                        double split, bool flip_sides,
                                        std::vector<int>& quadrant_of) {
    QuadrantGroups groups;
    quadrant_of.resize(sorted.size());
    std::vector<size_t> order(sorted.size());
    for (size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return std::abs(sorted[a].box.s - split) < std::abs(sorted[b].box.s - split);
    });
    for (size_t k : order) {
        bool left = sorted[k].box.s >= split;
        int q = quadrant_for(jaw, left, flip_sides);
        quadrant_of[k] = q;
        groups.by_class[q][static_cast<int>(sorted[k].class_id)].push_back(k);
    }
    return groups;
}

// Classes along each half-arch must be non-decreasing from the split
// outward (incisor, canine, premolar, molar); out-of-place detections are
// reported with their indices in the sorted list.
inline void check_sequence(const std::vector<Detection>& sorted, double split,
                           std::vector<std::string>& warnings) {
    for (int side = 0; side < 2; ++side) {
        std::vector<size_t> half;
        for (size_t k = 0; k < sorted.size(); ++k) {
            bool left = sorted[k].box.s >= split;
            if ((side == 1) == left) half.push_back(k);
        }
        std::sort(half.begin(), half.end(), [&](size_t a, size_t b) {
            return std::abs(sorted[a].box.s - split) < std::abs(sorted[b].box.s - split);
        });
        int prev = 0;
        for (size_t k : half) {
            int cls = static_cast<int>(sorted[k].class_id);
            if (cls < prev)
                warnings.push_back("sequence-anomaly: " +
                                   std::string(tooth_class_name(sorted[k].class_id)) +
                                   " outside of class order at sorted index " + std::to_string(k));
            prev = std::max(prev, cls);
        }
    }
}

}  // namespace detail

struct IdentificationOptions {
    bool flip_sides = false;       // swap the left/right -> quadrant mapping
    double panorama_midline = 320; // split fallback when detections give no span
};

/// Assign FDI numbers assuming a complete (possibly wisdom-less) dentition:
/// every present tooth receives a number inside -> outside, capped at the
/// FDI capacity of its class. Anomalies are reported as warnings, not
/// failures.
inline IdentificationResult identify(const std::vector<Detection>& dets, Jaw jaw,
                                     const IdentificationOptions& opt = {}) {
    IdentificationResult result;
    if (dets.empty()) return result;
    std::vector<Detection> sorted = dets;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const Detection& a, const Detection& b) { return a.box.s < b.box.s; });

    auto split = detail::quadrant_split(sorted, opt.panorama_midline, result.warnings);
    detail::check_sequence(sorted, split.split, result.warnings);
    std::vector<int> quadrant_of;
    auto groups = detail::group_by_quadrant(sorted, jaw, split.split, opt.flip_sides, quadrant_of);

    std::vector<std::optional<int>> numbers(sorted.size());
    for (int q = 1; q <= 4; ++q) {
        for (int cls = 1; cls <= 4; ++cls) {
            const auto& members = groups.by_class[q][cls];
            auto tc = static_cast<ToothClass>(cls);
            int cap = detail::fdi_capacity(tc);
            for (size_t rank = 0; rank < members.size(); ++rank) {
                if (static_cast<int>(rank) < cap) {
                    numbers[members[rank]] = detail::first_number(tc) + static_cast<int>(rank);
                } else {
                    result.warnings.push_back(
                        std::string("sequence-anomaly: more ") + tooth_class_name(tc) +
                        "s than FDI positions in quadrant " + std::to_string(q));
                }
            }
        }
    }
    for (size_t k = 0; k < sorted.size(); ++k) {
        IdentifiedTooth tooth;
        tooth.detection = sorted[k];
        tooth.id.jaw = jaw;
        tooth.id.quadrant = quadrant_of[k];
        tooth.id.number = numbers[k];
        tooth.id.class_id = sorted[k].class_id;
        result.teeth.push_back(tooth);
    }
    return result;
}

/// Missing-tooth-tolerant identification: number only what is unambiguous.
/// A class group receives numbers only when the incisor run is intact and
/// the group has its full FDI complement (2 incisors, 2 premolars, 3
/// molars per quadrant); otherwise those teeth keep their class label with
/// no number. Canines are unique per quadrant and always receive number 3.
inline IdentificationResult identify_with_gaps(const std::vector<Detection>& dets, Jaw jaw,
                                               const IdentificationOptions& opt = {}) {
    IdentificationResult result;
    if (dets.empty()) return result;
    std::vector<Detection> sorted = dets;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const Detection& a, const Detection& b) { return a.box.s < b.box.s; });

    auto split = detail::quadrant_split(sorted, opt.panorama_midline, result.warnings);
    detail::check_sequence(sorted, split.split, result.warnings);
    std::vector<int> quadrant_of;
    auto groups = detail::group_by_quadrant(sorted, jaw, split.split, opt.flip_sides, quadrant_of);

    std::vector<std::optional<int>> numbers(sorted.size());
    for (int q = 1; q <= 4; ++q) {
        for (int cls = 1; cls <= 4; ++cls) {
            const auto& members = groups.by_class[q][cls];
            if (members.empty()) continue;
            auto tc = static_cast<ToothClass>(cls);
            if (tc == ToothClass::canine) {
                if (members.size() == 1) {
                    numbers[members[0]] = 3;
                } else {
                    result.warnings.push_back("ambiguous: multiple canines in quadrant " +
                                              std::to_string(q));
                }
                continue;
            }
            bool complete = split.run_of_four &&
                            static_cast<int>(members.size()) == detail::fdi_capacity(tc);
            if (complete) {
                for (size_t rank = 0; rank < members.size(); ++rank)
                    numbers[members[rank]] = detail::first_number(tc) + static_cast<int>(rank);
            } else {
                result.warnings.push_back(std::string("ambiguous: ") +
                                          std::to_string(members.size()) + " " +
                                          tooth_class_name(tc) + "(s) in quadrant " +
                                          std::to_string(q) + "; numbering withheld");
            }
        }
    }
    for (size_t k = 0; k < sorted.size(); ++k) {
        IdentifiedTooth tooth;
        tooth.detection = sorted[k];
        tooth.id.jaw = jaw;
        tooth.id.quadrant = quadrant_of[k];
        tooth.id.number = numbers[k];
        tooth.id.class_id = sorted[k].class_id;
        result.teeth.push_back(tooth);
    }
    return result;
}

// --- FDI helpers and JSON ----------------------------------------------

inline ToothClass class_of_fdi(int fdi) {
    int pos = fdi % 10;
    if (pos == 1 || pos == 2) return ToothClass::incisor;
    if (pos == 3) return ToothClass::canine;
    if (pos == 4 || pos == 5) return ToothClass::premolar;
    if (pos >= 6 && pos <= 8) return ToothClass::molar;
    throw Error(ErrorCode::invalid_argument, "bad FDI code " + std::to_string(fdi));
}

inline Jaw jaw_of_fdi(int fdi) {
    int q = fdi / 10;
    if (q == 1 || q == 2) return Jaw::upper;
    if (q == 3 || q == 4) return Jaw::lower;
    throw Error(ErrorCode::invalid_argument, "bad FDI code " + std::to_string(fdi));
}

inline nlohmann::json identification_to_json(const IdentificationResult& result) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : result.teeth) {
        nlohmann::json entry = {
            {"fdi", nullptr},
            {"class", tooth_class_name(t.id.class_id)},
            {"quadrant", t.id.quadrant},
            {"box", {t.detection.box.s, t.detection.box.z, t.detection.box.w, t.detection.box.h}},
            {"score", t.detection.score},
        };
        if (auto f = t.id.fdi()) entry["fdi"] = *f;
        arr.push_back(entry);
    }
    return {{"teeth", arr}, {"warnings", result.warnings}};
}

inline std::vector<IdentifiedTooth> identification_from_json(const nlohmann::json& j, Jaw jaw) {
    std::vector<IdentifiedTooth> teeth;
    try {
        for (const auto& e : j.at("teeth")) {
            IdentifiedTooth t;
            auto box = e.at("box");
            t.detection.box = {box.at(0).get<double>(), box.at(1).get<double>(),
                               box.at(2).get<double>(), box.at(3).get<double>()};
            t.detection.score = e.value("score", 1.0);
            t.detection.class_id = tooth_class_from_name(e.at("class").get<std::string>());
            t.id.class_id = t.detection.class_id;
            t.id.jaw = jaw;
            t.id.quadrant = e.value("quadrant", 0);
            if (e.contains("fdi") && !e["fdi"].is_null()) {
                int fdi = e["fdi"].get<int>();
                t.id.quadrant = fdi / 10;
                t.id.number = fdi % 10;
            }
            teeth.push_back(t);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::format_error, std::string("bad identification JSON: ") + e.what());
    }
    return teeth;
}

}  // namespace toothseg
