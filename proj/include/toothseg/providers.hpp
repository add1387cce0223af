// Provider contracts that decouple the pipeline from neural networks, with
// three families of implementations: phantom-truth oracles (deterministic,
// optionally jittered), external processes speaking the library's file
// formats, and a self-contained threshold-based 3D segmenter.
#pragma once

#include <atomic>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <random>

#include "toothseg/detection.hpp"
#include "toothseg/histogram.hpp"
#include "toothseg/phantom.hpp"
#include "toothseg/roi.hpp"
#include "toothseg/volume_io.hpp"

namespace toothseg {

/// Detector: panorama -> detections (a grid-emitting detector is adapted via
/// select_detections before results reach the pipeline).
class DetectorProvider {
public:
    virtual ~DetectorProvider() = default;
    virtual std::vector<Detection> detect(const Image2& panorama, const PanoramaGeometry& g) = 0;
};

/// 2D segmenter: cropped tooth image (cube x cube) -> probability image on
/// the same grid. The box is passed along so truth-driven implementations
/// can locate the tooth; process-backed ones ignore it.
class Segmenter2DProvider {
public:
    virtual ~Segmenter2DProvider() = default;
    virtual Image2 segment(const Image2& crop, const PanoBox& box, const PanoramaGeometry& g) = 0;
};

struct RoiContext {
    ToothID fdi;
    VoxelBox bbox3;
};

/// 3D segmenter: two-channel ROI input -> probability volume at the same
/// cube resolution.
class Segmenter3DProvider {
public:
    virtual ~Segmenter3DProvider() = default;
    virtual Volume3 segment(const RoiInput& input, const RoiContext& ctx) = 0;
};

namespace detail {

inline void validate_probability_volume(const Volume3& v) {
    for (float x : v.data)
        if (!(x >= 0.0f && x <= 1.0f))
            throw Error(ErrorCode::provider_error, "segmenter output outside [0,1]");
}

inline void validate_probability_image(const Image2& img) {
    for (double x : img.data)
        if (!(x >= 0.0 && x <= 1.0))
            throw Error(ErrorCode::provider_error, "segmenter output outside [0,1]");
}

}  // namespace detail

// --- oracle providers --------------------------------------------------------

/// Detector answering from phantom ground truth: per-tooth boxes obtained by
/// projecting the voxel labels through the panorama geometry, score 1 and a
/// one-hot class. Optional center jitter (truncated at 3 sigma) exercises
/// identification robustness.
class OracleDetector : public DetectorProvider {
public:
    explicit OracleDetector(std::shared_ptr<const PhantomTruth> truth, double jitter_sigma = 0.0,
                            uint64_t seed = 0)
        : truth_(std::move(truth)), jitter_sigma_(jitter_sigma), seed_(seed) {
        if (!truth_) throw Error(ErrorCode::provider_error, "oracle detector: truth missing");
    }

    std::vector<Detection> detect(const Image2&, const PanoramaGeometry& g) override {
        auto footprints = project_tooth_footprints(*truth_, g);
        std::mt19937_64 rng(seed_ ^ (g.jaw == Jaw::upper ? 0x9e3779b9ull : 0xdeadbeefull));
        std::normal_distribution<double> noise(0.0, jitter_sigma_);
        std::vector<Detection> dets;
        for (const auto& [fdi, fp] : footprints) {
            if (fp.pixels == 0) continue;
            Detection d;
            d.box = fp.box;
            if (jitter_sigma_ > 0.0) {
                double cap = 3.0 * jitter_sigma_;
                d.box.s += std::clamp(noise(rng), -cap, cap);
                d.box.z += std::clamp(noise(rng), -cap, cap);
            }
            d.score = 1.0;
            d.class_id = class_of_fdi(fdi);
            DetectionGrid ref = DetectionGrid::make(g.width() - g.width() % 16,
                                                    g.height() - g.height() % 16, 16, 32, 64);
            std::tie(d.cell_i, d.cell_j) = ref.cell_of(d.box.s, d.box.z);
            dets.push_back(d);
        }
        return dets;
    }

private:
    std::shared_ptr<const PhantomTruth> truth_;
    double jitter_sigma_;
    uint64_t seed_;
};

/// 2D segmenter returning the projected silhouette of the truth tooth whose
/// footprint box best matches the requested box.
class OracleSegmenter2D : public Segmenter2DProvider {
public:
    explicit OracleSegmenter2D(std::shared_ptr<const PhantomTruth> truth)
        : truth_(std::move(truth)) {
        if (!truth_) throw Error(ErrorCode::provider_error, "oracle segmenter: truth missing");
    }

    Image2 segment(const Image2& crop, const PanoBox& box, const PanoramaGeometry& g) override {
        const auto& footprints = footprints_for(g);
        const ToothFootprint* best = nullptr;
        double best_iou = 0.0;
        for (const auto& [fdi, fp] : footprints) {
            if (fp.pixels == 0) continue;
            double v = iou(fp.box, box);
            if (v > best_iou) {
                best_iou = v;
                best = &fp;
            }
        }
        Image2 out(crop.dims, crop.spacing, 0.0);
        if (!best) return out;
        // crop the footprint to the box, then resample to the crop grid
        auto px = box_pixels(box, best->mask.dims[0], best->mask.dims[1]);
        if (px.empty()) return out;
        int s0 = px.front().u, z0 = px.front().v, s1 = px.back().u + 1, z1 = px.back().v + 1;
        Image2 window({s1 - s0, z1 - z0});
        for (int z = z0; z < z1; ++z)
            for (int s = s0; s < s1; ++s)
                window.at(s - s0, z - z0) = best->mask(s, z) ? 1.0 : 0.0;
        return resample_bilinear(window, crop.dims);
    }

private:
    const std::map<int, ToothFootprint>& footprints_for(const PanoramaGeometry& g) {
        std::lock_guard lock(mutex_);  // per-tooth calls may run concurrently
        auto& slot = g.jaw == Jaw::upper ? upper_ : lower_;
        std::string key = geometry_hash(g);
        if (!slot.first || slot.second != key) {
            slot.first = std::make_unique<std::map<int, ToothFootprint>>(
                project_tooth_footprints(*truth_, g));
            slot.second = key;
        }
        return *slot.first;
    }

    std::shared_ptr<const PhantomTruth> truth_;
    std::mutex mutex_;
    std::pair<std::unique_ptr<std::map<int, ToothFootprint>>, std::string> upper_, lower_;
};

/// 3D segmenter returning the truth tooth's voxel labels restricted to the
/// ROI bounding box, resampled to the cube grid with the shared transform.
class OracleSegmenter3D : public Segmenter3DProvider {
public:
    explicit OracleSegmenter3D(std::shared_ptr<const PhantomTruth> truth)
        : truth_(std::move(truth)) {
        if (!truth_) throw Error(ErrorCode::provider_error, "oracle segmenter: truth missing");
    }

    Volume3 segment(const RoiInput& input, const RoiContext& ctx) override {
        auto f = ctx.fdi.fdi();
        if (!f)
            throw Error(ErrorCode::provider_error,
                        "oracle 3d segmenter needs an FDI code for the ROI");
        auto ext = ctx.bbox3.extents();
        Volume3 tooth({ext[0], ext[1], ext[2]}, truth_->spacing);
        for (int z = ctx.bbox3.lo[2]; z < ctx.bbox3.hi[2]; ++z)
            for (int y = ctx.bbox3.lo[1]; y < ctx.bbox3.hi[1]; ++y)
                for (int x = ctx.bbox3.lo[0]; x < ctx.bbox3.hi[0]; ++x)
                    if (truth_->label_at(x, y, z) == *f)
                        tooth.at(x - ctx.bbox3.lo[0], y - ctx.bbox3.lo[1], z - ctx.bbox3.lo[2]) =
                            1.0f;
        return resample_trilinear(tooth, input.dims());
    }

private:
    std::shared_ptr<const PhantomTruth> truth_;
};

/// Self-contained 3D segmenter: two-level Otsu over the nonzero tight-channel
/// values, keep everything at or above the upper threshold (the bone/tooth
/// interface within the ROI).
class TightThresholdSegmenter3D : public Segmenter3DProvider {
public:
    Volume3 segment(const RoiInput& input, const RoiContext&) override {
        std::vector<float> nonzero;
        nonzero.reserve(input.tight.size() / 4);
        for (float v : input.tight.data)
            if (v > 0.0f) nonzero.push_back(v);
        Volume3 out(input.dims(), input.tight.spacing);
        if (nonzero.size() < 8) return out;
        double t1;
        try {
            Histogram h = detail::histogram_of_values(nonzero, {}, 256);
            t1 = otsu_two_level(h).second;
        } catch (const Error&) {
            return out;  // degenerate ROI content: no confident voxels
        }
        for (size_t i = 0; i < out.size(); ++i)
            out.data[i] = input.tight.data[i] >= t1 ? 1.0f : 0.0f;
        return out;
    }
};

// --- external process providers ----------------------------------------------

/// Run a command with {input} / {output} substituted, in a scratch dir.
/// Each invocation gets fresh file names, so concurrent per-tooth calls do
/// not collide.
class ExternalProcess {
public:
    ExternalProcess(std::string command_template, fs::path scratch_dir)
        : template_(std::move(command_template)), scratch_(std::move(scratch_dir)) {
        fs::create_directories(scratch_);
    }

    fs::path scratch() const { return scratch_; }

    fs::path unique_path(const std::string& stem, const std::string& ext) const {
        return scratch_ / (stem + "_" + std::to_string(counter_.fetch_add(1)) + ext);
    }

    void run(const fs::path& input, const fs::path& output) const {
        std::string cmd = template_;
        auto substitute = [&](const std::string& token, const std::string& value) {
            for (size_t at = cmd.find(token); at != std::string::npos; at = cmd.find(token))
                cmd.replace(at, token.size(), value);
        };
        substitute("{input}", input.string());
        substitute("{output}", output.string());
        std::error_code ec;
        fs::remove(output, ec);
        int rc = std::system(cmd.c_str());
        if (rc != 0)
            throw Error(ErrorCode::provider_error,
                        "provider command failed (exit " + std::to_string(rc) + "): " + cmd);
        if (!fs::exists(output))
            throw Error(ErrorCode::provider_error, "provider wrote no output: " + cmd);
    }

private:
    std::string template_;
    fs::path scratch_;
    mutable std::atomic<uint64_t> counter_{0};
};

/// Detector backed by an external command. The panorama is written as a
/// 16-bit PGM to {input}; the command must write either a detection JSON
/// array or a detection-grid JSON object to {output}. Outputs are validated
/// before they enter the pipeline.
class ExternalDetector : public DetectorProvider {
public:
    ExternalDetector(std::string command, fs::path scratch, double score_thresh = 0.5,
                     double iou_thresh = 0.6)
        : proc_(std::move(command), std::move(scratch)),
          score_thresh_(score_thresh),
          iou_thresh_(iou_thresh) {}

    std::vector<Detection> detect(const Image2& panorama, const PanoramaGeometry& g) override {
        fs::path in = proc_.scratch() / (std::string("pano_") + jaw_name(g.jaw) + ".pgm");
        fs::path out = proc_.scratch() / (std::string("dets_") + jaw_name(g.jaw) + ".json");
        save_pgm16(panorama, in);
        proc_.run(in, out);
        json j = detail::read_json_file(out);
        if (j.is_object() && j.contains("cells"))
            return select_detections(grid_from_json(j), score_thresh_, iou_thresh_);
        return detections_from_json(j);
    }

private:
    ExternalProcess proc_;
    double score_thresh_;
    double iou_thresh_;
};

/// 2D segmenter backed by an external command: crop goes out as 16-bit PGM,
/// the mask comes back as a u8 raw image (dims must match the crop).
class ExternalSegmenter2D : public Segmenter2DProvider {
public:
    ExternalSegmenter2D(std::string command, fs::path scratch)
        : proc_(std::move(command), std::move(scratch)) {}

    Image2 segment(const Image2& crop, const PanoBox&, const PanoramaGeometry&) override {
        fs::path in = proc_.unique_path("crop", ".pgm");
        fs::path out = proc_.unique_path("mask2d", ".raw");
        save_pgm16(crop, in);
        proc_.run(in, out);
        BinaryVolume3 m = load_mask(out);
        if (m.dims[0] != crop.dims[0] || m.dims[1] != crop.dims[1] || m.dims[2] != 1)
            throw Error(ErrorCode::provider_error, "2d segmenter mask dims mismatch");
        Image2 prob(crop.dims, crop.spacing);
        for (size_t i = 0; i < prob.data.size(); ++i) prob.data[i] = m.data[i] ? 1.0 : 0.0;
        return prob;
    }

private:
    ExternalProcess proc_;
};

/// 3D segmenter backed by an external command: the two-channel ROI input is
/// written to {input}; the command answers with a u8 raw mask of the same
/// cube dims at {output}.
class ExternalSegmenter3D : public Segmenter3DProvider {
public:
    ExternalSegmenter3D(std::string command, fs::path scratch)
        : proc_(std::move(command), std::move(scratch)) {}

    Volume3 segment(const RoiInput& input, const RoiContext&) override {
        fs::path in = proc_.unique_path("roi_input", ".raw");
        fs::path out = proc_.unique_path("mask3d", ".raw");
        save_roi_input(input, in);
        proc_.run(in, out);
        BinaryVolume3 m = load_mask(out);
        if (m.dims != input.dims())
            throw Error(ErrorCode::provider_error, "3d segmenter mask dims mismatch");
        Volume3 prob(m.dims, input.loose.spacing);
        for (size_t i = 0; i < prob.data.size(); ++i) prob.data[i] = m.data[i] ? 1.0f : 0.0f;
        return prob;
    }

private:
    ExternalProcess proc_;
};

}  // namespace toothseg
