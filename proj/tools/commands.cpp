#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <vector>

#include "depthedge/image_io.hpp"
#include "depthedge/parallel.hpp"

namespace depthedge::cli {

RunConfig Common::load() const { return config.empty() ? RunConfig{} : load_run_config(config); }

namespace {

void note(const Common& c, const std::string& msg) {
    if (!c.quiet) std::cerr << msg << "\n";
}

void ensure_dir(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw Error(ErrorKind::Io, p.string() + ": cannot create directory: " + ec.message());
}

void require(bool ok, const std::string& message) {
    if (!ok) throw input_error(message);
}

std::vector<SceneBundle> load_scenes(const Manifest& m, int jobs) {
    std::vector<SceneBundle> scenes(m.scenes.size());
    parallel_for(static_cast<int>(scenes.size()), jobs,
                 [&](int i) { scenes[static_cast<std::size_t>(i)] = read_scene(m.root / m.scenes[static_cast<std::size_t>(i)]); });
    return scenes;
}

Image edge_channel(const Image& img, const std::string& origin) {
    if (img.channels() == 1) return img;
    if (img.channels() == 3) return img.channel(0);
    throw shape_error(origin + ": expected a 1- or 3-channel edge map, got " + std::to_string(img.channels()));
}

}  // namespace

void run_gen(const Common& c, const GenArgs& a) {
    RunConfig cfg = c.load();
    if (a.count >= 0) cfg.dataset.count = a.count;
    if (a.width >= 0) cfg.dataset.width = a.width;
    if (a.height >= 0) cfg.dataset.height = a.height;
    if (a.seed >= 0) cfg.dataset.seed = static_cast<std::uint64_t>(a.seed);
    require(cfg.dataset.count >= 1, "--count must be >= 1");
    require(cfg.dataset.width >= 2 && cfg.dataset.height >= 2, "--width and --height must be >= 2");
    const fs::path root(a.out);
    ensure_dir(root);
    Manifest m{root, {}, {}};
    for (int i = 0; i < cfg.dataset.count; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "scene_%04d", i);
        m.scenes.emplace_back(name);
        m.seeds.push_back(scene_seed(cfg.dataset, i));
    }
    parallel_for(cfg.dataset.count, c.jobs, [&](int i) {
        const SceneBundle s = generate_scene(cfg.dataset, i);
        ensure_dir(root / s.name);
        write_scene(root / s.name, s);
    });
    write_manifest(m);
    note(c, "gen: wrote " + std::to_string(cfg.dataset.count) + " scenes to " + root.string());
}

void run_gt(const Common& c, const GtArgs& a) {
    const RunConfig cfg = c.load();
    if (!a.dataset.empty()) {
        require(a.disparity.empty() && a.normals.empty(), "gt: --dataset cannot be combined with --disparity/--normals");
        const Manifest m = read_manifest(a.dataset);
        parallel_for(static_cast<int>(m.scenes.size()), c.jobs, [&](int i) {
            const fs::path dir = m.root / m.scenes[static_cast<std::size_t>(i)];
            SceneBundle s = read_scene(dir);
            compute_truth(s, cfg.truth, cfg.mask);
            write_truth(dir, s);
        });
        note(c, "gt: wrote ground truth for " + std::to_string(m.scenes.size()) + " scenes");
        return;
    }
    require(!a.disparity.empty(), "gt: give --dataset, or --disparity with --normals or --camera");
    require(!a.out.empty(), "gt: --out is required with --disparity");
    require(!a.normals.empty() || !a.camera.empty(), "gt: --disparity needs --normals or --camera");
    const Image d = read_pfm(a.disparity);
    GroundTruth g;
    if (!a.normals.empty()) {
        g = make_ground_truth(d, read_pfm(a.normals), cfg.truth);
    } else {
        g = make_ground_truth(d, parse_camera(read_file(a.camera), a.camera), cfg.truth);
    }
    const fs::path out(a.out);
    ensure_dir(out);
    write_pfm(out / "edges.pfm", g.edge.image);
    write_pfm(out / "contour.pfm", g.contour.image);
    write_pfm(out / "crease.pfm", g.crease.image);
    write_file_atomic(out / "truth.txt", ground_truth_sidecar(cfg.truth));
    note(c, "gt: wrote edges.pfm, contour.pfm, crease.pfm to " + out.string());
}

void run_train(const Common& c, const TrainArgs& a) {
    RunConfig cfg = c.load();
    if (a.epochs >= 0) cfg.train.epochs = a.epochs;
    const Manifest m = read_manifest(a.dataset);
    const std::vector<SceneBundle> scenes = load_scenes(m, c.jobs);
    for (const auto& s : scenes)
        require(s.has_truth(), (m.root / s.name).string() + ": no ground truth; run `depthedge gt --dataset` first");
    const TrainResult r = train(scenes, cfg.arch, cfg.train, [&](const EpochLog& e) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "epoch %d/%d  train %.6f  val %.6f", e.epoch, cfg.train.epochs, e.train_loss,
                      e.val_loss);
        note(c, buf);
    });
    const fs::path out(a.out);
    if (out.has_parent_path()) ensure_dir(out.parent_path());
    save_model(out, r.params);
    fs::path loss = a.loss.empty() ? fs::path(out).replace_extension(".loss.csv") : fs::path(a.loss);
    write_file_atomic(loss, format_loss_csv(r.log));
    note(c, "train: wrote " + out.string() + " and " + loss.string());
}

void run_infer(const Common& c, const InferArgs& a) {
    const RunConfig cfg = c.load();
    require(a.scene.empty() != a.dataset.empty(), "infer: give exactly one of --scene or --dataset");
    const NetworkParameters<float> params = load_model(a.model);
    if (cfg.arch_given) require_same_architecture(cfg.arch, params.arch);
    auto run_one = [&](const fs::path& scene_dir, const fs::path& out) {
        const SceneBundle s = read_scene(scene_dir);
        const Image pred = infer(params, s, cfg.infer_tau);
        ensure_dir(out);
        if (params.arch.head == OutputHead::Edge) {
            write_pfm(out / kEdgesPred, pred);
        } else {
            write_pfm(out / kContourPred, pred.channel(0));
            Image dir(pred.width(), pred.height(), 3);
            for (int y = 0; y < pred.height(); ++y)
                for (int x = 0; x < pred.width(); ++x) {
                    dir.at(x, y, 0) = pred.at(x, y, 1);
                    dir.at(x, y, 1) = pred.at(x, y, 2);
                }
            write_pfm(out / kDirectionsPred, dir);
        }
    };
    if (!a.scene.empty()) {
        run_one(a.scene, a.out);
        note(c, "infer: wrote predictions to " + a.out);
        return;
    }
    const Manifest m = read_manifest(a.dataset);
    parallel_for(static_cast<int>(m.scenes.size()), c.jobs, [&](int i) {
        const std::string& name = m.scenes[static_cast<std::size_t>(i)];
        run_one(m.root / name, fs::path(a.out) / name);
    });
    note(c, "infer: wrote predictions for " + std::to_string(m.scenes.size()) + " scenes to " + a.out);
}

void run_segment(const Common& c, const SegmentArgs& a) {
    const RunConfig cfg = c.load();
    require(a.edges.empty() != a.predictions.empty(), "segment: give exactly one of --edges or --predictions");
    auto run_one = [&](const fs::path& edges_path, const fs::path& background, const fs::path& out) {
        const Image e = edge_channel(read_pfm(edges_path), edges_path.string());
        const SegmentationHierarchy h = segment(e, cfg.segment);
        ensure_dir(out);
        write_hierarchy(out / kMergeTree, out / kLabels, h);
        write_pfm(out / kUcm, ucm_raster(h));
        const Image bg = background.empty() ? e : read_pnm(background);
        write_ppm(out / kOverlay, ucm_overlay(bg, h));
    };
    if (!a.edges.empty()) {
        run_one(a.edges, a.background, a.out);
        note(c, "segment: wrote hierarchy to " + a.out);
        return;
    }
    require(a.background.empty(), "segment: --background applies to --edges; use --dataset with --predictions");
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(a.predictions))
        if (entry.is_directory() &&
            (fs::exists(entry.path() / kEdgesPred) || fs::exists(entry.path() / kContourPred)))
            names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());
    require(!names.empty(), a.predictions + ": no prediction directories (expected */" + kEdgesPred + ")");
    parallel_for(static_cast<int>(names.size()), c.jobs, [&](int i) {
        const fs::path dir = fs::path(a.predictions) / names[static_cast<std::size_t>(i)];
        const fs::path edges = fs::exists(dir / kEdgesPred) ? dir / kEdgesPred : dir / kContourPred;
        const fs::path bg = a.dataset.empty() ? fs::path() : fs::path(a.dataset) / names[static_cast<std::size_t>(i)] / "color.ppm";
        run_one(edges, bg, fs::path(a.out) / names[static_cast<std::size_t>(i)]);
    });
    note(c, "segment: wrote " + std::to_string(names.size()) + " hierarchies to " + a.out);
}

void run_refine(const Common& c, const RefineArgs& a) {
    const RunConfig cfg = c.load();
    const Image x0 = read_pfm(a.disparity);
    const Image contour = edge_channel(read_pfm(a.contour), a.contour);
    const Image dirs = directions_from_pfm(read_pfm(a.directions));
    const MultiscaleResult r = multiscale_refine(x0, contour, dirs, cfg.refine);
    const fs::path out(a.out);
    if (out.has_parent_path()) ensure_dir(out.parent_path());
    write_pfm(out, r.disparity);
    const std::string report = format_refine_report(r);
    if (a.report.empty()) {
        std::cout << report;
    } else {
        write_file_atomic(a.report, report);
    }
    note(c, "refine: wrote " + out.string());
}

void run_eval(const Common& c, const EvalArgs& a) {
    const RunConfig cfg = c.load();
    require(!a.method.empty() && a.method.find('/') == std::string::npos, "eval: --method must be a plain name");
    const Manifest m = read_manifest(a.dataset);
    const std::vector<double> thresholds = uniform_thresholds(cfg.eval.thresholds);
    const int radius = cfg.eval.slack_radius;

    std::vector<std::string> methods{a.method};
    if (a.baselines) methods.insert(methods.end(), {"color", "disparity", "normals", "agnostic"});
    const std::size_t n = m.scenes.size();
    // curves[method][scene]
    std::vector<std::vector<std::vector<BoundaryPR>>> curves(methods.size(), std::vector<std::vector<BoundaryPR>>(n));

    parallel_for(static_cast<int>(n), c.jobs, [&](int i) {
        const std::string& name = m.scenes[static_cast<std::size_t>(i)];
        const SceneBundle s = read_scene(m.root / name);
        require(s.has_truth(), (m.root / name).string() + ": no ground truth; run `depthedge gt --dataset` first");
        const Image gt = binarize(s.edges_gt, cfg.eval.gt_threshold);
        const fs::path hdir = fs::path(a.hierarchies) / name;
        if (!fs::exists(hdir / kMergeTree)) throw Error(ErrorKind::Io, (hdir / kMergeTree).string() + ": missing hierarchy for scene " + name);
        const SegmentationHierarchy h = read_hierarchy(hdir / kMergeTree, hdir / kLabels);
        curves[0][static_cast<std::size_t>(i)] = pr_curve(h, gt, thresholds, radius);
        if (!a.baselines) return;
        const BaselineConfig& bc = cfg.eval.baseline;
        const Image maps[4] = {
            baseline_single(BaselineChannel::Color, s.color, s.disparity_est, s.normals_est, s.camera, bc),
            baseline_single(BaselineChannel::Disparity, s.color, s.disparity_est, s.normals_est, s.camera, bc),
            baseline_single(BaselineChannel::Normals, s.color, s.disparity_est, s.normals_est, s.camera, bc),
            baseline_data_agnostic(s.color, s.disparity_est, s.normals_est, bc),
        };
        for (std::size_t k = 0; k < 4; ++k)
            curves[k + 1][static_cast<std::size_t>(i)] = pr_curve(segment(maps[k], cfg.segment), gt, thresholds, radius);
    });

    const fs::path out(a.out);
    std::vector<OdsOis> scores;
    for (std::size_t k = 0; k < methods.size(); ++k) {
        ensure_dir(out / methods[k]);
        for (std::size_t i = 0; i < n; ++i)
            write_file_atomic(out / methods[k] / (m.scenes[i] + ".csv"), format_pr_csv(curves[k][i]));
        scores.push_back(ods_ois(curves[k]));
    }
    const std::string table = format_summary_table(methods, scores);
    write_file_atomic(out / "summary.txt", table);
    std::cout << table;
}

}  // namespace depthedge::cli
