// Pipeline configuration and the end-to-end composition: panoramas ->
// detection -> identification -> 2D segmentation -> ROI extraction -> 3D
// segmentation, with per-tooth products written under an output directory.
#pragma once

#include <atomic>
#include <mutex>
#include <thread>

#include "toothseg/metrics.hpp"
#include "toothseg/providers.hpp"

namespace toothseg {

struct DetectionParams {
    int g = 16;
    std::array<double, 2> anchor{32.0, 64.0};
    double score_thresh = 0.5;
    double iou_thresh = 0.6;
};

struct RoiParams {
    int padding_voxels = 2;
    int resize = 128;
};

struct ProviderSelection {
    std::string detector = "oracle";  // oracle | external:<cmd>
    std::string seg2d = "oracle";     // oracle | box | external:<cmd>
    std::string seg3d = "oracle";     // oracle | tight-thresh | external:<cmd>
};

struct PipelineConfig {
    PanoramaParams panorama;
    DetectionParams detection;
    RoiParams roi;
    ProviderSelection provider;

    void validate() const {
        panorama.validate();
        if (detection.score_thresh < 0 || detection.score_thresh > 1 ||
            detection.iou_thresh < 0 || detection.iou_thresh > 1)
            throw Error(ErrorCode::invalid_argument, "detection thresholds must lie in [0,1]");
        if (detection.g <= 0 || detection.anchor[0] <= 0 || detection.anchor[1] <= 0)
            throw Error(ErrorCode::invalid_argument, "bad detection grid parameters");
        if (roi.padding_voxels < 0 || roi.resize < 2)
            throw Error(ErrorCode::invalid_argument, "bad roi parameters");
    }
};

inline nlohmann::json config_to_json(const PipelineConfig& c) {
    return {
        {"panorama",
         {{"n_interp", c.panorama.n_interp},
          {"n_extrap", c.panorama.n_extrap},
          {"width", c.panorama.width},
          {"height", c.panorama.height},
          {"alpha_mm", c.panorama.alpha_mm},
          {"ray_step_mm", c.panorama.ray_step_mm},
          {"z_crop_bottom", c.panorama.z_crop_bottom},
          {"bins", c.panorama.bins},
          {"closing_radius", c.panorama.closing_radius},
          {"control_spacing_px", c.panorama.control_spacing_px},
          {"min_component_fraction", c.panorama.min_component_fraction}}},
        {"detection",
         {{"g", c.detection.g},
          {"anchor", c.detection.anchor},
          {"score_thresh", c.detection.score_thresh},
          {"iou_thresh", c.detection.iou_thresh}}},
        {"roi", {{"padding_voxels", c.roi.padding_voxels}, {"resize", c.roi.resize}}},
        {"provider",
         {{"detector", c.provider.detector},
          {"seg2d", c.provider.seg2d},
          {"seg3d", c.provider.seg3d}}},
    };
}

inline PipelineConfig config_from_json(const nlohmann::json& j) {
    PipelineConfig c;
    try {
        if (j.contains("panorama")) {
            const auto& p = j["panorama"];
            c.panorama.n_interp = p.value("n_interp", c.panorama.n_interp);
            c.panorama.n_extrap = p.value("n_extrap", c.panorama.n_extrap);
            c.panorama.width = p.value("width", c.panorama.width);
            c.panorama.height = p.value("height", c.panorama.height);
            c.panorama.alpha_mm = p.value("alpha_mm", c.panorama.alpha_mm);
            c.panorama.ray_step_mm = p.value("ray_step_mm", c.panorama.ray_step_mm);
            c.panorama.z_crop_bottom = p.value("z_crop_bottom", c.panorama.z_crop_bottom);
            c.panorama.bins = p.value("bins", c.panorama.bins);
            c.panorama.closing_radius = p.value("closing_radius", c.panorama.closing_radius);
            c.panorama.control_spacing_px =
                p.value("control_spacing_px", c.panorama.control_spacing_px);
            c.panorama.min_component_fraction =
                p.value("min_component_fraction", c.panorama.min_component_fraction);
        }
        if (j.contains("detection")) {
            const auto& d = j["detection"];
            c.detection.g = d.value("g", c.detection.g);
            if (d.contains("anchor")) {
                c.detection.anchor[0] = d["anchor"].at(0).get<double>();
                c.detection.anchor[1] = d["anchor"].at(1).get<double>();
            }
            c.detection.score_thresh = d.value("score_thresh", c.detection.score_thresh);
            c.detection.iou_thresh = d.value("iou_thresh", c.detection.iou_thresh);
        }
        if (j.contains("roi")) {
            c.roi.padding_voxels = j["roi"].value("padding_voxels", c.roi.padding_voxels);
            c.roi.resize = j["roi"].value("resize", c.roi.resize);
        }
        if (j.contains("provider")) {
            c.provider.detector = j["provider"].value("detector", c.provider.detector);
            c.provider.seg2d = j["provider"].value("seg2d", c.provider.seg2d);
            c.provider.seg3d = j["provider"].value("seg3d", c.provider.seg3d);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::format_error, std::string("bad config JSON: ") + e.what());
    }
    c.validate();
    return c;
}

struct PipelineProviders {
    std::shared_ptr<DetectorProvider> detector;
    std::shared_ptr<Segmenter2DProvider> seg2d;  // null: use the box as the mask
    std::shared_ptr<Segmenter3DProvider> seg3d;
};

struct ToothResult {
    ToothID id;
    PanoBox box;
    VoxelBox bbox3;
    size_t seg_pixels = 0;         // pixels in the 2D mask
    std::string stem;              // file stem under <out>/<jaw>/teeth
    BinaryVolume3 mask_cube;       // final 3D mask on the ROI cube grid
};

struct JawResult {
    JawPanorama pano;
    std::vector<Detection> detections;
    IdentificationResult identification;
    std::vector<ToothResult> teeth;
};

struct PipelineResult {
    JawResult upper;
    JawResult lower;
    double bone_t0 = 0.0, bone_t1 = 0.0;
};

namespace detail {

inline std::string tooth_stem(const ToothID& id, int ordinal) {
    if (auto f = id.fdi()) return "fdi_" + std::to_string(*f);
    return std::string(tooth_class_name(id.class_id)) + "_unnumbered_" + std::to_string(ordinal);
}

// Map the box region of the panorama through the 2D segmenter: crop,
// resample to the segmenter grid, threshold the returned probabilities at
// 0.5, and paste back as panorama-space pixels.
inline std::vector<PixelCoord> segment_tooth_2d(const Image2& pano, const PanoBox& box,
                                                Segmenter2DProvider& seg,
                                                const PanoramaGeometry& g, int cube) {
    auto px = box_pixels(box, pano.dims[0], pano.dims[1]);
    if (px.empty()) return {};
    int s0 = px.front().u, z0 = px.front().v;
    int s1 = px.back().u + 1, z1 = px.back().v + 1;
    Image2 crop = crop_image(pano, {s0, z0}, {s1, z1});
    Image2 crop_rs = resample_bilinear(crop, {cube, cube});
    Image2 prob = seg.segment(crop_rs, box, g);
    validate_probability_image(prob);
    Image2 prob_box = resample_bilinear(prob, {s1 - s0, z1 - z0});
    std::vector<PixelCoord> out;
    for (int z = 0; z < z1 - z0; ++z)
        for (int s = 0; s < s1 - s0; ++s)
            if (prob_box(s, z) >= 0.5) out.push_back({s + s0, z + z0});
    return out;
}

inline void run_teeth(const Volume3& volume, const JawPanorama& pano, JawResult& result,
                      const PipelineProviders& providers, const PipelineConfig& config,
                      const fs::path& jaw_dir, int jobs) {
    const auto& teeth = result.identification.teeth;
    result.teeth.resize(teeth.size());
    std::atomic<size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;

    auto worker = [&]() {
        for (size_t k = next.fetch_add(1); k < teeth.size(); k = next.fetch_add(1)) {
            try {
                const IdentifiedTooth& tooth = teeth[k];
                ToothResult& tr = result.teeth[k];
                tr.id = tooth.id;
                tr.box = tooth.detection.box;
                tr.stem = tooth_stem(tooth.id, static_cast<int>(k));

                auto b_box = box_pixels(tooth.detection.box, pano.panorama.dims[0],
                                        pano.panorama.dims[1]);
                if (b_box.empty())
                    throw Error(ErrorCode::geometry_error,
                                "detection box lies outside the panorama");
                std::vector<PixelCoord> b_seg;
                if (providers.seg2d) {
                    b_seg = segment_tooth_2d(pano.panorama, tooth.detection.box,
                                             *providers.seg2d, pano.geometry,
                                             config.roi.resize);
                    // the tight domain must stay within the loose one
                    std::vector<PixelCoord> inside;
                    int s0 = b_box.front().u, z0 = b_box.front().v;
                    int s1 = b_box.back().u + 1, z1 = b_box.back().v + 1;
                    for (auto p : b_seg)
                        if (p.u >= s0 && p.u < s1 && p.v >= z0 && p.v < z1) inside.push_back(p);
                    b_seg = std::move(inside);
                }
                if (b_seg.empty()) b_seg = b_box;
                tr.seg_pixels = b_seg.size();

                RoiPair roi = extract_roi_pair(volume, b_box, b_seg, pano.geometry, tooth.id,
                                               config.roi.padding_voxels);
                tr.bbox3 = roi.bbox3;
                RoiInput input = make_roi_input(roi, config.roi.resize);
                save_roi_pair(roi, pano.geometry, jaw_dir / "teeth", tr.stem);
                save_roi_input(input, jaw_dir / "teeth" / (tr.stem + "_input.raw"));

                if (providers.seg3d) {
                    RoiContext ctx{tooth.id, roi.bbox3};
                    Volume3 prob = providers.seg3d->segment(input, ctx);
                    if (prob.dims != input.dims())
                        throw Error(ErrorCode::provider_error, "3d segmenter dims mismatch");
                    validate_probability_volume(prob);
                    tr.mask_cube = BinaryVolume3(prob.dims);
                    for (size_t i = 0; i < prob.data.size(); ++i)
                        tr.mask_cube.data[i] = prob.data[i] >= 0.5f ? 1 : 0;
                    save_mask(tr.mask_cube, jaw_dir / "teeth" / (tr.stem + "_mask.raw"),
                              prob.spacing);
                }

                nlohmann::json meta = roi_meta_to_json(roi, pano.geometry);
                meta["files"] = {{"loose", tr.stem + "_loose.raw"},
                                 {"tight", tr.stem + "_tight.raw"},
                                 {"input", tr.stem + "_input.raw"}};
                if (providers.seg3d) meta["files"]["mask"] = tr.stem + "_mask.raw";
                meta["seg_pixels"] = tr.seg_pixels;
                write_json_file(jaw_dir / "teeth" / (tr.stem + "_roi.json"), meta);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };

    int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(teeth.size())));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

/// Run Steps 1-4 end to end and write all products under out_dir:
/// <jaw>/panorama.pgm + geometry.json + detections.json +
/// identification.json and per-tooth ROI/input/mask files named by FDI code.
inline PipelineResult run_pipeline(const Volume3& volume, const PipelineConfig& config,
                                   const PipelineProviders& providers, const fs::path& out_dir,
                                   int jobs = 1) {
    config.validate();
    if (!providers.detector)
        throw Error(ErrorCode::provider_error, "pipeline needs a detector provider");
    fs::create_directories(out_dir);
    write_json_file(out_dir / "config.json", config_to_json(config));

    PipelineResult result;
    PanoramaBundle bundle = build_panoramas(volume, config.panorama);
    result.bone_t0 = bundle.bone_t0;
    result.bone_t1 = bundle.bone_t1;
    result.upper.pano = std::move(bundle.upper);
    result.lower.pano = std::move(bundle.lower);

    for (JawResult* jaw_result : {&result.upper, &result.lower}) {
        const Jaw jaw = jaw_result->pano.geometry.jaw;
        fs::path jaw_dir = out_dir / jaw_name(jaw);
        fs::create_directories(jaw_dir);
        save_pgm16(jaw_result->pano.panorama, jaw_dir / "panorama.pgm");
        write_json_file(jaw_dir / "geometry.json", geometry_to_json(jaw_result->pano.geometry));

        jaw_result->detections =
            providers.detector->detect(jaw_result->pano.panorama, jaw_result->pano.geometry);
        for (const auto& d : jaw_result->detections) {
            if (!(d.score >= 0.0 && d.score <= 1.0) || d.box.w <= 0 || d.box.h <= 0)
                throw Error(ErrorCode::provider_error, "detector emitted an invalid detection");
        }
        write_json_file(jaw_dir / "detections.json", detections_to_json(jaw_result->detections));

        IdentificationOptions id_opt;
        id_opt.panorama_midline = config.panorama.width / 2.0;
        jaw_result->identification =
            identify_with_gaps(jaw_result->detections, jaw, id_opt);
        write_json_file(jaw_dir / "identification.json",
                        identification_to_json(jaw_result->identification));

        detail::run_teeth(volume, jaw_result->pano, *jaw_result, providers, config, jaw_dir,
                          jobs);
    }
    return result;
}

/// Build providers from the config's provider strings. Oracle providers need
/// phantom truth; external commands get a scratch directory under out_dir.
inline PipelineProviders make_providers(const PipelineConfig& config,
                                        std::shared_ptr<const PhantomTruth> truth,
                                        const fs::path& out_dir, double jitter_sigma = 0.0,
                                        uint64_t seed = 0) {
    PipelineProviders p;
    auto external_arg = [](const std::string& s) { return s.substr(std::string("external:").size()); };
    const auto& sel = config.provider;

    if (sel.detector == "oracle") {
        if (!truth)
            throw Error(ErrorCode::provider_error, "oracle detector requires --truth");
        p.detector = std::make_shared<OracleDetector>(truth, jitter_sigma, seed);
    } else if (sel.detector.starts_with("external:")) {
        p.detector = std::make_shared<ExternalDetector>(external_arg(sel.detector),
                                                        out_dir / "provider_scratch",
                                                        config.detection.score_thresh,
                                                        config.detection.iou_thresh);
    } else {
        throw Error(ErrorCode::invalid_argument, "unknown detector provider: " + sel.detector);
    }

    if (sel.seg2d == "oracle") {
        if (!truth)
            throw Error(ErrorCode::provider_error, "oracle 2d segmenter requires --truth");
        p.seg2d = std::make_shared<OracleSegmenter2D>(truth);
    } else if (sel.seg2d == "box") {
        p.seg2d = nullptr;  // loose == tight
    } else if (sel.seg2d.starts_with("external:")) {
        p.seg2d = std::make_shared<ExternalSegmenter2D>(external_arg(sel.seg2d),
                                                        out_dir / "provider_scratch");
    } else {
        throw Error(ErrorCode::invalid_argument, "unknown 2d segmenter provider: " + sel.seg2d);
    }

    if (sel.seg3d == "oracle") {
        if (!truth)
            throw Error(ErrorCode::provider_error, "oracle 3d segmenter requires --truth");
        p.seg3d = std::make_shared<OracleSegmenter3D>(truth);
    } else if (sel.seg3d == "tight-thresh") {
        p.seg3d = std::make_shared<TightThresholdSegmenter3D>();
    } else if (sel.seg3d == "none") {
        p.seg3d = nullptr;
    } else if (sel.seg3d.starts_with("external:")) {
        p.seg3d = std::make_shared<ExternalSegmenter3D>(external_arg(sel.seg3d),
                                                        out_dir / "provider_scratch");
    } else {
        throw Error(ErrorCode::invalid_argument, "unknown 3d segmenter provider: " + sel.seg3d);
    }
    return p;
}

}  // namespace toothseg
