// Command-line front end for the CBCT tooth pipeline. Subcommands cover
// phantom generation, panoramic reconstruction, detection post-processing,
// FDI identification, ROI extraction, the full pipeline, and evaluation.
// Failures print a structured JSON object on stderr and exit with a
// distinct code per error class.
#include <CLI11.hpp>
#include <iostream>

#include "toothseg/pipeline.hpp"

namespace ts = toothseg;
using nlohmann::json;

namespace {

struct ConfigFlags {
    std::string config_path;
    ts::PipelineConfig config;

    // CLI override bookkeeping: CLI11 only writes flags that were given, so
    // load the file first and let flags win.
    void add_to(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "pipeline config JSON (flags override)");
        cmd->add_option("--n-interp", config.panorama.n_interp);
        cmd->add_option("--n-extrap", config.panorama.n_extrap);
        cmd->add_option("--width", config.panorama.width);
        cmd->add_option("--height", config.panorama.height);
        cmd->add_option("--alpha", config.panorama.alpha_mm, "slab half-thickness, mm");
        cmd->add_option("--ray-step", config.panorama.ray_step_mm, "integration step, mm");
        cmd->add_option("--z-crop", config.panorama.z_crop_bottom, "bottom slices to drop");
        cmd->add_option("--bins", config.panorama.bins);
        cmd->add_option("--closing-radius", config.panorama.closing_radius);
        cmd->add_option("--g", config.detection.g);
        cmd->add_option("--anchor", config.detection.anchor)->expected(2);
        cmd->add_option("--score-thresh", config.detection.score_thresh);
        cmd->add_option("--iou-thresh", config.detection.iou_thresh);
        cmd->add_option("--padding", config.roi.padding_voxels);
        cmd->add_option("--resize", config.roi.resize);
    }

    // Re-parse pattern: values from --config file unless a flag was passed.
    ts::PipelineConfig resolve(CLI::App* cmd) {
        if (config_path.empty()) {
            config.validate();
            return config;
        }
        ts::PipelineConfig from_file =
            ts::config_from_json(ts::detail::read_json_file(config_path));
        auto take = [&](const char* flag, auto member, auto value) {
            if (cmd->count(flag)) from_file.*member = value;
        };
        (void)take;  // fields are copied explicitly below
        if (cmd->count("--n-interp")) from_file.panorama.n_interp = config.panorama.n_interp;
        if (cmd->count("--n-extrap")) from_file.panorama.n_extrap = config.panorama.n_extrap;
        if (cmd->count("--width")) from_file.panorama.width = config.panorama.width;
        if (cmd->count("--height")) from_file.panorama.height = config.panorama.height;
        if (cmd->count("--alpha")) from_file.panorama.alpha_mm = config.panorama.alpha_mm;
        if (cmd->count("--ray-step")) from_file.panorama.ray_step_mm = config.panorama.ray_step_mm;
        if (cmd->count("--z-crop")) from_file.panorama.z_crop_bottom = config.panorama.z_crop_bottom;
        if (cmd->count("--bins")) from_file.panorama.bins = config.panorama.bins;
        if (cmd->count("--closing-radius"))
            from_file.panorama.closing_radius = config.panorama.closing_radius;
        if (cmd->count("--g")) from_file.detection.g = config.detection.g;
        if (cmd->count("--anchor")) from_file.detection.anchor = config.detection.anchor;
        if (cmd->count("--score-thresh"))
            from_file.detection.score_thresh = config.detection.score_thresh;
        if (cmd->count("--iou-thresh")) from_file.detection.iou_thresh = config.detection.iou_thresh;
        if (cmd->count("--padding")) from_file.roi.padding_voxels = config.roi.padding_voxels;
        if (cmd->count("--resize")) from_file.roi.resize = config.roi.resize;
        from_file.validate();
        return from_file;
    }
};

int cmd_phantom(const std::string& out_dir, const std::string& spec_path,
                const std::string& preset, const std::vector<int>& missing, uint64_t seed,
                bool with_boxes) {
    ts::PhantomSpec spec;
    if (!spec_path.empty())
        spec = ts::phantom_spec_from_json(ts::detail::read_json_file(spec_path));
    else if (preset == "default")
        spec = ts::default_phantom_spec();
    else if (preset == "full-res")
        spec = ts::full_res_phantom_spec();
    else if (preset == "hard")
        spec = ts::hard_phantom_spec();
    else
        throw ts::Error(ts::ErrorCode::invalid_argument, "unknown preset '" + preset + "'");
    if (!missing.empty()) spec.missing = missing;
    spec.seed = seed;

    auto [volume, truth] = ts::generate_phantom(spec);
    if (with_boxes) ts::fill_analytic_boxes(truth);
    ts::save_phantom(out_dir, volume, truth, spec);
    std::cout << "phantom: " << truth.teeth.size() << " teeth, volume " << spec.dims[0] << "x"
              << spec.dims[1] << "x" << spec.dims[2] << " -> " << out_dir << "\n";
    return 0;
}

int cmd_panorama(const std::string& volume_path, const std::string& out_dir,
                 const ts::PipelineConfig& config) {
    ts::Volume3 volume = ts::load_volume(volume_path);
    ts::PanoramaBundle bundle = ts::build_panoramas(volume, config.panorama);
    ts::fs::create_directories(out_dir);
    ts::write_json_file(ts::fs::path(out_dir) / "config.json", ts::config_to_json(config));
    for (const ts::JawPanorama* jaw : {&bundle.upper, &bundle.lower}) {
        std::string name = ts::jaw_name(jaw->geometry.jaw);
        ts::save_pgm16(jaw->panorama, ts::fs::path(out_dir) / ("P_" + name + ".pgm"));
        ts::write_json_file(ts::fs::path(out_dir) / ("geometry_" + name + ".json"),
                            ts::geometry_to_json(jaw->geometry));
    }
    std::cout << "panoramas: " << bundle.upper.panorama.dims[0] << "x"
              << bundle.upper.panorama.dims[1] << " (upper, lower) -> " << out_dir << "\n";
    return 0;
}

int cmd_detect_post(const std::string& grid_path, const std::string& out_path,
                    const ts::PipelineConfig& config) {
    ts::DetectionGrid grid = ts::grid_from_json(ts::detail::read_json_file(grid_path));
    auto dets = ts::select_detections(grid, config.detection.score_thresh,
                                      config.detection.iou_thresh);
    ts::write_json_file(out_path, ts::detections_to_json(dets));
    std::cout << "detections: " << dets.size() << " kept -> " << out_path << "\n";
    return 0;
}

int cmd_identify(const std::string& dets_path, const std::string& jaw_name_arg,
                 const std::string& out_path, const std::string& mode, double pano_midline,
                 bool flip) {
    auto dets = ts::detections_from_json(ts::detail::read_json_file(dets_path));
    ts::Jaw jaw = ts::jaw_from_name(jaw_name_arg);
    ts::IdentificationOptions opt;
    opt.panorama_midline = pano_midline;
    opt.flip_sides = flip;
    ts::IdentificationResult result = mode == "strict" ? ts::identify(dets, jaw, opt)
                                                       : ts::identify_with_gaps(dets, jaw, opt);
    ts::write_json_file(out_path, ts::identification_to_json(result));
    int numbered = 0;
    for (const auto& t : result.teeth) numbered += t.id.number.has_value();
    std::cout << "identified: " << numbered << "/" << result.teeth.size() << " numbered -> "
              << out_path << "\n";
    return 0;
}

int cmd_extract_roi(const std::string& volume_path, const std::string& geometry_path,
                    const std::string& id_path, const std::string& seg_dir,
                    const std::string& out_dir, const ts::PipelineConfig& config) {
    ts::Volume3 volume = ts::load_volume(volume_path);
    ts::PanoramaGeometry geometry =
        ts::geometry_from_json(ts::detail::read_json_file(geometry_path));
    auto teeth = ts::identification_from_json(ts::detail::read_json_file(id_path), geometry.jaw);
    ts::fs::create_directories(out_dir);
    int done = 0;
    for (size_t k = 0; k < teeth.size(); ++k) {
        const auto& tooth = teeth[k];
        std::string stem = ts::detail::tooth_stem(tooth.id, static_cast<int>(k));
        auto b_box =
            ts::box_pixels(tooth.detection.box, geometry.width(), geometry.height());
        std::vector<ts::PixelCoord> b_seg;
        if (!seg_dir.empty()) {
            ts::fs::path mask_path = ts::fs::path(seg_dir) / (stem + "_seg.raw");
            if (ts::fs::exists(mask_path)) {
                ts::BinaryVolume3 m = ts::load_mask(mask_path);
                if (m.dims[0] != geometry.width() || m.dims[1] != geometry.height())
                    throw ts::Error(ts::ErrorCode::format_error,
                                    "segmentation mask dims do not match the panorama");
                ts::BinaryImage2 img({m.dims[0], m.dims[1]});
                img.data = m.data;
                int s0 = b_box.front().u, z0 = b_box.front().v;
                int s1 = b_box.back().u + 1, z1 = b_box.back().v + 1;
                for (auto p : ts::mask_pixels(img))
                    if (p.u >= s0 && p.u < s1 && p.v >= z0 && p.v < z1) b_seg.push_back(p);
            }
        }
        if (b_seg.empty()) b_seg = b_box;
        ts::RoiPair roi = ts::extract_roi_pair(volume, b_box, b_seg, geometry, tooth.id,
                                               config.roi.padding_voxels);
        ts::RoiInput input = ts::make_roi_input(roi, config.roi.resize);
        ts::save_roi_pair(roi, geometry, out_dir, stem);
        ts::save_roi_input(input, ts::fs::path(out_dir) / (stem + "_input.raw"));
        ++done;
    }
    std::cout << "rois: " << done << " teeth -> " << out_dir << "\n";
    return 0;
}

int cmd_pipeline(const std::string& volume_path, const std::string& out_dir,
                 ts::PipelineConfig config, const std::string& truth_dir, double jitter_sigma,
                 uint64_t seed, int jobs) {
    ts::Volume3 volume = ts::load_volume(volume_path);
    std::shared_ptr<const ts::PhantomTruth> truth;
    if (!truth_dir.empty())
        truth = std::make_shared<ts::PhantomTruth>(ts::load_phantom_truth(truth_dir));
    ts::PipelineProviders providers =
        ts::make_providers(config, truth, out_dir, jitter_sigma, seed);
    ts::PipelineResult result = ts::run_pipeline(volume, config, providers, out_dir, jobs);
    size_t teeth = result.upper.teeth.size() + result.lower.teeth.size();
    std::cout << "pipeline: " << teeth << " teeth (" << result.upper.teeth.size() << " upper, "
              << result.lower.teeth.size() << " lower) -> " << out_dir << "\n";
    return 0;
}

json evaluate_side(const json& pred, const json& truth, const ts::fs::path& pred_dir,
                   const ts::fs::path& truth_dir, double iou_min) {
    json out = json::object();

    auto boxes_of = [](const json& j, const char* key) {
        std::vector<ts::LabeledBox> boxes;
        if (!j.contains(key)) return boxes;
        const json& section = j[key];
        const json& arr = section.is_object() && section.contains("teeth") ? section["teeth"]
                                                                           : section;
        for (const auto& e : arr) {
            ts::LabeledBox b;
            auto box = e.at("box");
            b.box = {box.at(0).get<double>(), box.at(1).get<double>(), box.at(2).get<double>(),
                     box.at(3).get<double>()};
            if (e.contains("fdi") && !e["fdi"].is_null()) b.fdi = e["fdi"].get<int>();
            b.score = e.value("score", 1.0);
            boxes.push_back(b);
        }
        return boxes;
    };

    auto pred_ids = boxes_of(pred, "identifications");
    auto truth_ids = boxes_of(truth, "identifications");
    if (!pred_ids.empty() || !truth_ids.empty()) {
        auto pr = ts::identification_metrics(pred_ids, truth_ids, iou_min);
        out["precision"] = pr.precision;
        out["recall"] = pr.recall;
        out["f1"] = pr.f1;
    }

    auto pred_dets = boxes_of(pred, "detections");
    auto truth_dets = boxes_of(truth, "detections");
    if (!pred_dets.empty() && !truth_dets.empty())
        out["ap"] = ts::average_precision(pred_dets, truth_dets, iou_min);

    if (pred.contains("masks") && truth.contains("masks")) {
        std::map<std::string, ts::fs::path> truth_masks;
        for (const auto& m : truth["masks"])
            truth_masks[m.at("id").get<std::string>()] =
                truth_dir / m.at("path").get<std::string>();
        double dice_sum = 0, hd_sum = 0, assd_sum = 0;
        int n = 0;
        json per_tooth = json::object();
        for (const auto& m : pred["masks"]) {
            std::string id = m.at("id").get<std::string>();
            auto it = truth_masks.find(id);
            if (it == truth_masks.end())
                throw ts::Error(ts::ErrorCode::format_error,
                                "truth has no mask for id '" + id + "'");
            ts::fs::path pred_path = pred_dir / m.at("path").get<std::string>();
            ts::BinaryVolume3 a = ts::load_mask(pred_path);
            ts::BinaryVolume3 b = ts::load_mask(it->second);
            ts::RawHeader h = ts::read_sidecar(pred_path);
            double d = ts::dice(a, b);
            auto sd = ts::surface_distances(a, b, h.spacing);
            per_tooth[id] = {{"dice", d}, {"hd_mm", sd.hausdorff_mm}, {"assd_mm", sd.assd_mm}};
            dice_sum += d;
            hd_sum += sd.hausdorff_mm;
            assd_sum += sd.assd_mm;
            ++n;
        }
        if (n > 0) {
            out["dice"] = dice_sum / n;
            out["hd_mm"] = hd_sum / n;
            out["assd_mm"] = assd_sum / n;
            out["per_tooth"] = per_tooth;
        }
    }
    return out;
}

int cmd_evaluate(const std::string& pred_path, const std::string& truth_path,
                 const std::string& out_path, double iou_min) {
    json pred = ts::detail::read_json_file(pred_path);
    json truth = ts::detail::read_json_file(truth_path);
    json metrics = evaluate_side(pred, truth, ts::fs::path(pred_path).parent_path(),
                                 ts::fs::path(truth_path).parent_path(), iou_min);
    ts::write_json_file(out_path, metrics);
    std::cout << metrics.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CBCT tooth pipeline: panoramic reconstruction, detection post-processing, "
                 "FDI identification, and 3D tooth ROI extraction"};
    app.require_subcommand(1);

    // phantom
    auto* phantom = app.add_subcommand("phantom", "generate a synthetic CBCT phantom");
    std::string ph_out, ph_spec, ph_preset = "default";
    std::vector<int> ph_missing;
    uint64_t ph_seed = 1;
    bool ph_boxes = true;
    phantom->add_option("--out", ph_out)->required();
    phantom->add_option("--spec", ph_spec, "phantom spec JSON");
    phantom->add_option("--preset", ph_preset, "default | full-res | hard");
    phantom->add_option("--missing", ph_missing, "FDI codes to omit");
    phantom->add_option("--seed", ph_seed);
    phantom->add_flag("!--no-boxes", ph_boxes, "skip analytic panorama boxes");

    // panorama
    auto* panorama = app.add_subcommand("panorama", "build upper/lower panoramic images");
    std::string pa_volume, pa_out;
    ConfigFlags pa_cfg;
    panorama->add_option("--volume", pa_volume)->required();
    panorama->add_option("--out", pa_out)->required();
    pa_cfg.add_to(panorama);

    // detect-post
    auto* detect = app.add_subcommand("detect-post", "score-filter and NMS a detection grid");
    std::string dp_grid, dp_out;
    ConfigFlags dp_cfg;
    detect->add_option("--grid", dp_grid)->required();
    detect->add_option("--out", dp_out)->required();
    dp_cfg.add_to(detect);

    // identify
    auto* ident = app.add_subcommand("identify", "assign FDI numbers to detections");
    std::string id_dets, id_jaw, id_out, id_mode = "gaps";
    double id_midline = 320.0;
    bool id_flip = false;
    ident->add_option("--detections", id_dets)->required();
    ident->add_option("--jaw", id_jaw)->required()->check(CLI::IsMember({"upper", "lower"}));
    ident->add_option("--out", id_out)->required();
    ident->add_option("--mode", id_mode)->check(CLI::IsMember({"gaps", "strict"}));
    ident->add_option("--pano-midline", id_midline);
    ident->add_flag("--flip-sides", id_flip);

    // extract-roi
    auto* roi = app.add_subcommand("extract-roi", "back-project boxes/masks into 3D ROIs");
    std::string er_volume, er_geometry, er_ids, er_segdir, er_out;
    ConfigFlags er_cfg;
    roi->add_option("--volume", er_volume)->required();
    roi->add_option("--geometry", er_geometry)->required();
    roi->add_option("--identifications", er_ids)->required();
    roi->add_option("--seg-dir", er_segdir, "directory of per-tooth 2D masks");
    roi->add_option("--out", er_out)->required();
    er_cfg.add_to(roi);

    // pipeline
    auto* pipe = app.add_subcommand("pipeline", "run steps 1-4 end to end");
    std::string pl_volume, pl_out, pl_truth;
    double pl_jitter = 0.0;
    uint64_t pl_seed = 0;
    int pl_jobs = 1;
    ConfigFlags pl_cfg;
    pipe->add_option("--volume", pl_volume)->required();
    pipe->add_option("--out", pl_out)->required();
    pipe->add_option("--truth", pl_truth, "phantom truth dir (oracle providers)");
    pipe->add_option("--detector", pl_cfg.config.provider.detector,
                     "oracle | external:<cmd with {input} {output}>");
    pipe->add_option("--seg2d", pl_cfg.config.provider.seg2d, "oracle | box | external:<cmd>");
    pipe->add_option("--seg3d", pl_cfg.config.provider.seg3d,
                     "oracle | tight-thresh | none | external:<cmd>");
    pipe->add_option("--jitter-sigma", pl_jitter, "oracle detector jitter, px");
    pipe->add_option("--seed", pl_seed);
    pipe->add_option("--jobs", pl_jobs, "worker threads for per-tooth steps");
    pl_cfg.add_to(pipe);

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "compare prediction and truth JSON files");
    std::string ev_pred, ev_truth, ev_out;
    double ev_iou = 0.5;
    eval->add_option("--pred", ev_pred)->required();
    eval->add_option("--truth", ev_truth)->required();
    eval->add_option("--out", ev_out)->required();
    eval->add_option("--iou", ev_iou, "IoU threshold for box matching");

    CLI11_PARSE(app, argc, argv);

    try {
        if (phantom->parsed())
            return cmd_phantom(ph_out, ph_spec, ph_preset, ph_missing, ph_seed, ph_boxes);
        if (panorama->parsed())
            return cmd_panorama(pa_volume, pa_out, pa_cfg.resolve(panorama));
        if (detect->parsed()) return cmd_detect_post(dp_grid, dp_out, dp_cfg.resolve(detect));
        if (ident->parsed())
            return cmd_identify(id_dets, id_jaw, id_out, id_mode, id_midline, id_flip);
        if (roi->parsed())
            return cmd_extract_roi(er_volume, er_geometry, er_ids, er_segdir, er_out,
                                   er_cfg.resolve(roi));
        if (pipe->parsed()) {
            ts::PipelineConfig config = pl_cfg.resolve(pipe);
            if (pipe->count("--detector")) config.provider.detector = pl_cfg.config.provider.detector;
            if (pipe->count("--seg2d")) config.provider.seg2d = pl_cfg.config.provider.seg2d;
            if (pipe->count("--seg3d")) config.provider.seg3d = pl_cfg.config.provider.seg3d;
            return cmd_pipeline(pl_volume, pl_out, config, pl_truth, pl_jitter, pl_seed, pl_jobs);
        }
        if (eval->parsed()) return cmd_evaluate(ev_pred, ev_truth, ev_out, ev_iou);
    } catch (const ts::Error& e) {
        json err = {{"error", ts::error_code_name(e.code())},
                    {"code", static_cast<int>(e.code())},
                    {"message", e.message()}};
        if (!e.stage().empty()) err["stage"] = e.stage();
        std::cerr << err.dump() << "\n";
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        std::cerr << json({{"error", "unexpected"}, {"message", e.what()}}).dump() << "\n";
        return 1;
    }
    return 0;
}
