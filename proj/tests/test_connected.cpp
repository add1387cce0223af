#include <catch_amalgamated.hpp>

#include "helpers.hpp"
#include "toothseg/connected.hpp"

using namespace toothseg;

namespace {

void fill_box(BinaryVolume3& b, std::array<int, 3> lo, std::array<int, 3> hi) {
    for (int z = lo[2]; z < hi[2]; ++z)
        for (int y = lo[1]; y < hi[1]; ++y)
            for (int x = lo[0]; x < hi[0]; ++x) b.at(x, y, z) = 1;
}

}  // namespace

TEST_CASE("split_jaws orders components by size", "[connected]") {
    BinaryVolume3 b({30, 30, 30});
    fill_box(b, {2, 2, 2}, {12, 12, 12});    // 1000 voxels
    fill_box(b, {20, 20, 20}, {25, 25, 40});  // clipped to 5x5x10 = 250... keep disjoint
    // rebuild the second as exactly 500 voxels
    b = BinaryVolume3({30, 30, 30});
    fill_box(b, {2, 2, 2}, {12, 12, 12});     // 1000
    fill_box(b, {20, 20, 2}, {25, 25, 22});   // 5*5*20 = 500
    JawPair jaws = split_jaws(b);
    REQUIRE(jaws.lower.count() == 1000);
    REQUIRE(jaws.upper.count() == 500);
    REQUIRE(jaws.lower(3, 3, 3) == 1);
    REQUIRE(jaws.upper(21, 21, 3) == 1);
    // disjoint
    for (size_t i = 0; i < b.size(); ++i) REQUIRE((jaws.lower.data[i] & jaws.upper.data[i]) == 0);
}

TEST_CASE("split_jaws fails on a single fused blob", "[connected]") {
    BinaryVolume3 b({20, 20, 20});
    fill_box(b, {2, 2, 2}, {18, 18, 18});
    try {
        split_jaws(b);
        FAIL("expected jaws-not-separated");
    } catch (const Error& e) {
        REQUIRE(e.code() == ErrorCode::jaws_not_separated);
    }
}

TEST_CASE("split_jaws ignores specks below the size floor", "[connected]") {
    BinaryVolume3 b({30, 30, 30});
    fill_box(b, {2, 2, 2}, {12, 12, 12});  // 1000
    b.at(28, 28, 28) = 1;                  // speck, below 1% of foreground
    REQUIRE_THROWS_AS(split_jaws(b), Error);
    fill_box(b, {20, 20, 2}, {25, 25, 22});  // second real component
    REQUIRE_NOTHROW(split_jaws(b));
}

TEST_CASE("26-connectivity joins diagonal voxels", "[connected]") {
    BinaryVolume3 b({4, 4, 4});
    b.at(0, 0, 0) = 1;
    b.at(1, 1, 1) = 1;  // corner-adjacent
    Labeling3 lab = label_components_26(b);
    REQUIRE(lab.components.size() == 1);
}

TEST_CASE("component ordering ties break by first voxel index", "[connected]") {
    BinaryVolume3 b({10, 10, 2});
    fill_box(b, {0, 0, 0}, {2, 2, 1});  // 4 voxels, first index 0
    fill_box(b, {6, 6, 0}, {8, 8, 1});  // 4 voxels, later index
    Labeling3 lab = label_components_26(b);
    REQUIRE(lab.components.size() == 2);
    REQUIRE(lab.components[0].voxels == lab.components[1].voxels);
    REQUIRE(lab.components[0].first_index < lab.components[1].first_index);
}

TEST_CASE("largest_component_8 keeps the dominant blob", "[connected]") {
    BinaryImage2 img({10, 10});
    for (int v = 1; v < 4; ++v)
        for (int u = 1; u < 6; ++u) img.at(u, v) = 1;
    img.at(9, 9) = 1;
    BinaryImage2 out = largest_component_8(img);
    REQUIRE(out.count() == 15);
    REQUIRE(out(9, 9) == 0);
    REQUIRE(count_components_8(out) == 1);
}
