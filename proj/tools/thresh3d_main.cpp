// Reference external 3D segmentation provider: reads a two-channel ROI
// input file, thresholds the tight channel at the two-level Otsu bone/tooth
// cut, and writes the u8 mask. Usable with the pipeline's
// `--seg3d external:"toothseg_thresh3d {input} {output}"`.
#include <iostream>

#include "toothseg/providers.hpp"

int main(int argc, char** argv) {
    if (argc != 3) {
        std::cerr << "usage: toothseg_thresh3d <roi_input.raw> <mask_out.raw>\n";
        return 2;
    }
    try {
        toothseg::RoiInput input = toothseg::load_roi_input(argv[1]);
        toothseg::TightThresholdSegmenter3D seg;
        toothseg::Volume3 prob = seg.segment(input, {});
        toothseg::BinaryVolume3 mask(prob.dims);
        for (size_t i = 0; i < prob.data.size(); ++i)
            mask.data[i] = prob.data[i] >= 0.5f ? 1 : 0;
        toothseg::save_mask(mask, argv[2], prob.spacing);
    } catch (const toothseg::Error& e) {
        std::cerr << e.what() << "\n";
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
    return 0;
}
