#include <catch_amalgamated.hpp>

#include <set>

#include "helpers.hpp"
#include "toothseg/identify.hpp"

using namespace toothseg;

namespace {

// Full 16-tooth jaw sequence along s with ~30 px pitch:
// M M M P P C I I | I I C P P M M M
std::vector<Detection> full_jaw(double jitter = 0.0, unsigned seed = 0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, jitter);
    const ToothClass half[8] = {ToothClass::molar,   ToothClass::molar,   ToothClass::molar,
                                ToothClass::premolar, ToothClass::premolar, ToothClass::canine,
                                ToothClass::incisor, ToothClass::incisor};
    std::vector<Detection> dets;
    double s = 80.0;
    for (int k = 0; k < 16; ++k) {
        ToothClass cls = k < 8 ? half[k] : half[15 - k];
        Detection d;
        d.box = {s + (jitter > 0 ? noise(rng) : 0.0), 160.0, 26.0, 60.0};
        d.score = 1.0;
        d.class_id = cls;
        dets.push_back(d);
        s += 30.0;
    }
    return dets;
}

std::vector<int> fdi_codes(const IdentificationResult& r) {
    std::vector<int> codes;
    for (const auto& t : r.teeth) codes.push_back(t.id.fdi().value_or(0));
    return codes;
}

}  // namespace

TEST_CASE("identify numbers a complete upper jaw", "[identify]") {
    auto result = identify(full_jaw(), Jaw::upper);
    REQUIRE(result.teeth.size() == 16);
    // ascending s: right side outward-in 8..1, then left side 1..8
    std::vector<int> expect{18, 17, 16, 15, 14, 13, 12, 11, 21, 22, 23, 24, 25, 26, 27, 28};
    REQUIRE(fdi_codes(result) == expect);
    REQUIRE(result.warnings.empty());
}

TEST_CASE("identify maps the lower jaw to quadrants 4 and 3", "[identify]") {
    auto result = identify(full_jaw(), Jaw::lower);
    std::vector<int> expect{48, 47, 46, 45, 44, 43, 42, 41, 31, 32, 33, 34, 35, 36, 37, 38};
    REQUIRE(fdi_codes(result) == expect);
}

TEST_CASE("identify is invariant under input permutation", "[identify]") {
    auto dets = full_jaw();
    auto base = fdi_codes(identify(dets, Jaw::upper));
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        std::shuffle(dets.begin(), dets.end(), rng);
        REQUIRE(fdi_codes(identify(dets, Jaw::upper)) == base);
    }
}

TEST_CASE("no FDI code is assigned twice within a jaw", "[identify]") {
    auto result = identify(full_jaw(1.5, 7), Jaw::upper);
    std::set<int> seen;
    for (const auto& t : result.teeth) {
        if (auto f = t.id.fdi()) {
            REQUIRE(!seen.count(*f));
            seen.insert(*f);
        }
    }
}

TEST_CASE("single canine gets number 3, side from the panorama midline", "[identify]") {
    Detection d;
    d.box = {420.0, 160.0, 25.0, 60.0};
    d.score = 1.0;
    d.class_id = ToothClass::canine;
    IdentificationOptions opt;
    opt.panorama_midline = 320.0;
    auto result = identify({d}, Jaw::upper, opt);
    REQUIRE(result.teeth.size() == 1);
    REQUIRE(result.teeth[0].id.number == 3);
    REQUIRE(result.teeth[0].id.quadrant == 2);  // higher s = patient left
    REQUIRE(result.teeth[0].id.fdi() == 23);

    d.box.s = 150.0;
    auto right = identify({d}, Jaw::upper, opt);
    REQUIRE(right.teeth[0].id.fdi() == 13);
}

TEST_CASE("identify flags a canine between incisors", "[identify]") {
    auto dets = full_jaw();
    // swap one incisor and the canine on the left side: I C I pattern
    std::swap(dets[9].class_id, dets[10].class_id);
    auto result = identify(dets, Jaw::upper);
    bool flagged = false;
    for (const auto& w : result.warnings)
        flagged = flagged || w.find("sequence-anomaly") != std::string::npos;
    REQUIRE(flagged);
    REQUIRE(result.teeth.size() == 16);  // best-effort output, not a failure
}

TEST_CASE("identify_with_gaps equals identify on a complete dentition", "[identify]") {
    auto dets = full_jaw();
    REQUIRE(fdi_codes(identify_with_gaps(dets, Jaw::upper)) ==
            fdi_codes(identify(dets, Jaw::upper)));
}

TEST_CASE("missing first premolars yield class-only premolars", "[identify]") {
    auto dets = full_jaw();
    // remove the inner premolar on each side (positions 4 and 11 in s order)
    std::vector<Detection> gappy;
    for (size_t k = 0; k < dets.size(); ++k)
        if (k != 4 && k != 11) gappy.push_back(dets[k]);
    auto result = identify_with_gaps(gappy, Jaw::upper);
    REQUIRE(result.teeth.size() == 14);
    for (const auto& t : result.teeth) {
        if (t.id.class_id == ToothClass::premolar) {
            REQUIRE(!t.id.number.has_value());  // ambiguous: no number
        } else {
            REQUIRE(t.id.number.has_value());  // everything else fully numbered
        }
    }
}

TEST_CASE("one molar removed per side withholds molar numbers", "[identify]") {
    auto dets = full_jaw();
    std::vector<Detection> gappy;
    for (size_t k = 0; k < dets.size(); ++k)
        if (k != 1 && k != 14) gappy.push_back(dets[k]);  // drop one molar per side
    auto result = identify_with_gaps(gappy, Jaw::upper);
    for (const auto& t : result.teeth) {
        if (t.id.class_id == ToothClass::molar) REQUIRE(!t.id.number.has_value());
        else REQUIRE(t.id.number.has_value());
    }
}

TEST_CASE("numbering is monotone in distance from the split", "[identify]") {
    auto result = identify(full_jaw(), Jaw::upper);
    // within each quadrant and class, higher numbers are farther from center
    for (int q : {1, 2}) {
        for (ToothClass cls : {ToothClass::incisor, ToothClass::premolar, ToothClass::molar}) {
            double prev_dist = -1.0;
            int prev_num = 0;
            for (const auto& t : result.teeth) {
                if (t.id.quadrant != q || t.id.class_id != cls || !t.id.number) continue;
                double dist = std::abs(t.detection.box.s - 305.0);  // split near the middle
                if (t.id.number.value() > prev_num && prev_num != 0) REQUIRE(dist > prev_dist);
                prev_num = t.id.number.value();
                prev_dist = dist;
            }
        }
    }
}

TEST_CASE("identification JSON round trip", "[identify]") {
    auto result = identify_with_gaps(full_jaw(), Jaw::upper);
    auto j = identification_to_json(result);
    auto teeth = identification_from_json(j, Jaw::upper);
    REQUIRE(teeth.size() == result.teeth.size());
    for (size_t k = 0; k < teeth.size(); ++k) {
        REQUIRE(teeth[k].id.fdi() == result.teeth[k].id.fdi());
        REQUIRE(teeth[k].id.class_id == result.teeth[k].id.class_id);
    }
}

TEST_CASE("fdi helpers", "[identify]") {
    REQUIRE(class_of_fdi(11) == ToothClass::incisor);
    REQUIRE(class_of_fdi(23) == ToothClass::canine);
    REQUIRE(class_of_fdi(35) == ToothClass::premolar);
    REQUIRE(class_of_fdi(48) == ToothClass::molar);
    REQUIRE(jaw_of_fdi(14) == Jaw::upper);
    REQUIRE(jaw_of_fdi(41) == Jaw::lower);
    REQUIRE_THROWS_AS(class_of_fdi(19), Error);
}
