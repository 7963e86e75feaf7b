#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <string>

#include "commands.hpp"
#include "depthedge/error.hpp"

using namespace depthedge;
using namespace depthedge::cli;

namespace {

enum Exit : int {
    kOk = 0,
    kInternal = 1,
    kUsage = 2,
    kParse = 3,
    kShape = 4,
    kInput = 5,
    kNumeric = 6,
    kConfigMismatch = 7,
    kIo = 8,
};

int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::Parse: return kParse;
        case ErrorKind::Shape: return kShape;
        case ErrorKind::Input: return kInput;
        case ErrorKind::Numeric: return kNumeric;
        case ErrorKind::ConfigMismatch: return kConfigMismatch;
        case ErrorKind::Io: return kIo;
    }
    return kInternal;
}

const char* kExitCodes =
    "Exit codes: 0 ok, 1 internal, 2 usage, 3 parse, 4 shape, 5 input,\n"
    "6 numeric, 7 config mismatch, 8 io.";

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"depthedge: depth-edge detection, segmentation and disparity refinement"};
    app.footer(kExitCodes);
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    Common common;
    app.add_option("-j,--jobs", common.jobs, "Scenes processed in parallel (1 is reproducible)")
        ->check(CLI::PositiveNumber);
    app.add_option("-c,--config", common.config, "Run config file (key = value); defaults when absent")
        ->check(CLI::ExistingFile);
    app.add_flag("-q,--quiet", common.quiet, "Suppress progress messages");

    GenArgs gen;
    auto* g = app.add_subcommand("gen", "Generate synthetic scenes and a manifest");
    g->add_option("-o,--out", gen.out, "Output dataset directory")->required();
    g->add_option("-n,--count", gen.count, "Scene count (-1: dataset.count)");
    g->add_option("--width", gen.width, "Canvas width (-1: dataset.width)");
    g->add_option("--height", gen.height, "Canvas height (-1: dataset.height)");
    g->add_option("--seed", gen.seed, "Dataset seed (-1: dataset.seed)");

    GtArgs gt;
    auto* t = app.add_subcommand("gt", "Compute ground-truth edge probabilities");
    t->add_option("--dataset", gt.dataset, "Dataset directory or manifest; writes truth into each scene");
    t->add_option("--disparity", gt.disparity, "Disparity PFM (single-file mode)");
    t->add_option("--normals", gt.normals, "Normals PFM, 3 channels");
    t->add_option("--camera", gt.camera, "Camera intrinsics file, used when --normals is absent");
    t->add_option("-o,--out", gt.out, "Output directory for edges.pfm, contour.pfm, crease.pfm");

    TrainArgs tr;
    auto* r = app.add_subcommand("train", "Train the fusion network");
    r->add_option("--dataset", tr.dataset, "Dataset directory or manifest (with ground truth)")->required();
    r->add_option("-o,--out", tr.out, "Model file")->required();
    r->add_option("--loss", tr.loss, "Loss CSV (empty: model path with .loss.csv)");
    r->add_option("--epochs", tr.epochs, "Epoch count (-1: train.epochs)");

    InferArgs inf;
    auto* i = app.add_subcommand("infer", "Predict edge maps with a trained model");
    i->add_option("-m,--model", inf.model, "Model file")->required()->check(CLI::ExistingFile);
    i->add_option("--scene", inf.scene, "Single scene directory");
    i->add_option("--dataset", inf.dataset, "Dataset directory or manifest");
    i->add_option("-o,--out", inf.out, "Output directory (one subdirectory per scene with --dataset)")->required();

    SegmentArgs seg;
    auto* s = app.add_subcommand("segment", "Build boundary hierarchies from edge maps");
    s->add_option("--edges", seg.edges, "Edge PFM (single-file mode)");
    s->add_option("--predictions", seg.predictions, "Directory of per-scene predictions from infer");
    s->add_option("--background", seg.background, "Image under the overlay with --edges (default: the edge map)");
    s->add_option("--dataset", seg.dataset, "Dataset whose color images back the overlays with --predictions");
    s->add_option("-o,--out", seg.out, "Output directory")->required();

    RefineArgs ref;
    auto* f = app.add_subcommand("refine", "Refine a disparity map along contours");
    f->add_option("--disparity", ref.disparity, "Disparity PFM")->required()->check(CLI::ExistingFile);
    f->add_option("--contour", ref.contour, "Contour probability PFM")->required()->check(CLI::ExistingFile);
    f->add_option("--directions", ref.directions, "Direction PFM (d_u, d_v, 0)")->required()->check(CLI::ExistingFile);
    f->add_option("-o,--out", ref.out, "Refined disparity PFM")->required();
    f->add_option("--report", ref.report, "Report file (empty: stdout)");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Boundary precision/recall and ODS/OIS");
    e->add_option("--hierarchies", ev.hierarchies, "Directory of per-scene hierarchies from segment")->required();
    e->add_option("--dataset", ev.dataset, "Dataset directory or manifest (with ground truth)")->required();
    e->add_option("-o,--out", ev.out, "Output directory for PR CSVs and summary.txt")->required();
    e->add_option("--method", ev.method, "Method name for the hierarchies");
    e->add_flag("--baselines", ev.baselines, "Also score the single-channel and data-agnostic baselines");

    auto* cfg = app.add_subcommand("config", "Print the effective run config");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        return app.exit(err) == 0 ? kOk : kUsage;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        if (name == "gen") run_gen(common, gen);
        else if (name == "gt") run_gt(common, gt);
        else if (name == "train") run_train(common, tr);
        else if (name == "infer") run_infer(common, inf);
        else if (name == "segment") run_segment(common, seg);
        else if (name == "refine") run_refine(common, ref);
        else if (name == "eval") run_eval(common, ev);
        else if (cfg->parsed()) std::cout << format_run_config(common.load());
        return kOk;
    } catch (const Error& err) {
        std::cerr << "depthedge " << name << ": error: " << err.what() << "\n";
        return exit_code(err.kind());
    } catch (const std::filesystem::filesystem_error& err) {
        std::cerr << "depthedge " << name << ": error: " << err.what() << "\n";
        return kIo;
    } catch (const std::exception& err) {
        std::cerr << "depthedge " << name << ": internal error: " << err.what() << "\n";
        return kInternal;
    }
}
