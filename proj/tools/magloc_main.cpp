#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "magloc/magloc.hpp"

namespace fs = std::filesystem;

namespace {

// exit codes: 0 success, 1 domain failure (saturation, localization, empty
// slice), 2 usage or config error
constexpr int kOk = 0;
constexpr int kDomainFailure = 1;
constexpr int kUsageError = 2;

struct PhantomArgs {
    double height = 1.75;
    double resolution = 0.005;
    double margin_xy = 0.05;
    double margin_z = 0.05;
    std::string out;
};

struct ValidateArgs {
    std::string config;
};

struct RunArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> threads;
};

struct ReportArgs {
    std::string in_dir;
    std::string slice;
    std::string projection;
    std::string out;
};

int env_default_threads() {
    if (const char* env = std::getenv("MAGLOC_THREADS")) {
        int v = 0;
        if (magloc::parse_int(env, v) && v > 0) return v;
    }
    return 0;
}

int cmd_phantom(const PhantomArgs& args) {
    const magloc::BodyModel body =
        magloc::generate_phantom(args.height, args.resolution, args.margin_xy, args.margin_z);
    const std::vector<std::string> header = {
        "phantom voxel grid",
        "height_meters = " + magloc::format_double(args.height),
        "resolution_meters = " + magloc::format_double(args.resolution),
        "margin_xy_meters = " + magloc::format_double(args.margin_xy),
        "margin_z_meters = " + magloc::format_double(args.margin_z),
        "voxels = " + std::to_string(body.voxels.size()),
    };
    magloc::save_voxels(body, args.out, header);
    std::cout << "voxels: " << body.voxels.size() << "\n"
              << "resolution: " << magloc::format_double(body.resolution) << " m\n"
              << "bounding box: (" << magloc::format_double(body.bounding_box.min.x) << ","
              << magloc::format_double(body.bounding_box.min.y) << ","
              << magloc::format_double(body.bounding_box.min.z) << ") - ("
              << magloc::format_double(body.bounding_box.max.x) << ","
              << magloc::format_double(body.bounding_box.max.y) << ","
              << magloc::format_double(body.bounding_box.max.z) << ")\n"
              << "written: " << args.out << "\n";
    return kOk;
}

int cmd_validate(const ValidateArgs& args) {
    magloc::ScenarioConfig cfg = magloc::scenario_from_file(args.config);
    const magloc::BodyModel body =
        cfg.phantom_file.empty()
            ? magloc::generate_phantom(cfg.phantom_height, cfg.phantom_resolution,
                                       cfg.phantom_margin_xy, cfg.phantom_margin_z)
            : magloc::load_voxels(cfg.phantom_file);
    const magloc::WireSet wires =
        cfg.wire_file.empty()
            ? magloc::builtin_arrangement(*cfg.arrangement, cfg.clearance, cfg.current,
                                          body.bounding_box)
            : magloc::load_wires(cfg.wire_file);
    const magloc::SaturationReport report =
        magloc::validate_saturation(wires, body, cfg.saturation_limit, cfg.mu);
    std::cout << "wires: " << wires.size() << "\n"
              << "voxels: " << body.voxels.size() << "\n"
              << "max in-body field: " << magloc::format_double(report.max_field * 1e6)
              << " uT (limit " << magloc::format_double(cfg.saturation_limit * 1e6) << " uT)\n"
              << "worst voxel: (" << magloc::format_double(report.worst_voxel.x) << ","
              << magloc::format_double(report.worst_voxel.y) << ","
              << magloc::format_double(report.worst_voxel.z) << "), wire " << report.worst_wire
              << "\n"
              << "saturation: " << (report.ok ? "ok" : "FAILED") << "\n";
    return report.ok ? kOk : kDomainFailure;
}

int cmd_run(const RunArgs& args) {
    magloc::ScenarioConfig cfg = magloc::scenario_from_file(args.config);
    if (args.seed) cfg.seed = *args.seed;
    if (args.out) cfg.output_dir = *args.out;
    if (args.threads) cfg.threads = *args.threads;
    else if (cfg.threads == 0) cfg.threads = env_default_threads();
    if (cfg.output_dir.empty())
        throw std::runtime_error("run: an output directory is required (--out or [simulation] output)");

    const magloc::ScenarioResult result = magloc::run_scenario(cfg);
    std::cout << "voxels: " << result.points.size() << "\n"
              << "median position error: "
              << magloc::format_double(result.stats.position.q2 * 100.0) << " cm\n"
              << "max position error: " << magloc::format_double(result.stats.position.max * 100.0)
              << " cm\n"
              << "outputs: " << cfg.output_dir.string() << "\n";
    return kOk;
}

int cmd_report(const ReportArgs& args) {
    if (args.slice.empty() == args.projection.empty())
        throw std::runtime_error("report: pass exactly one of --slice or --projection");
    const fs::path in_dir = args.in_dir;
    const auto points = magloc::load_points_csv(in_dir / "points.csv");
    const double resolution = magloc::infer_resolution(points);

    magloc::ErrorMap map{magloc::Axis::X, magloc::Axis::Z, {}, {}, {}};
    fs::path out_path;
    if (!args.slice.empty()) {
        const std::size_t eq = args.slice.find('=');
        if (eq == std::string::npos || eq == 0)
            throw std::runtime_error("report: --slice expects axis=coordinate, e.g. x=0.3");
        const magloc::Axis axis = magloc::axis_from_name(args.slice.substr(0, eq));
        double coordinate = 0.0;
        if (!magloc::parse_double(std::string_view(args.slice).substr(eq + 1), coordinate))
            throw std::runtime_error("report: bad slice coordinate in '" + args.slice + "'");
        map = magloc::slice_error_map(points, axis, coordinate, resolution);
        std::string name = "map_slice_";
        name += magloc::axis_name(axis);
        name += "_" + magloc::format_double(coordinate) + ".csv";
        out_path = args.out.empty() ? in_dir / name : fs::path(args.out);
    } else {
        const magloc::Plane plane = magloc::plane_from_name(args.projection);
        map = magloc::projection_error_map(points, plane, resolution);
        out_path = args.out.empty() ? in_dir / ("map_projection_" + args.projection + ".csv")
                                    : fs::path(args.out);
    }
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("report: cannot write " + out_path.string());
    magloc::write_error_map_csv(map, out);
    std::cout << "grid: " << map.row_coords.size() << " x " << map.col_coords.size() << "\n"
              << "written: " << out_path.string() << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Magnetic-anchor localization simulator for in-body nano-machines"};
    app.require_subcommand(1);

    PhantomArgs phantom_args;
    CLI::App* phantom = app.add_subcommand("phantom", "Generate a voxel phantom file");
    phantom->add_option("--height", phantom_args.height, "Body height in meters");
    phantom->add_option("--resolution", phantom_args.resolution, "Voxel pitch in meters");
    phantom->add_option("--margin-xy", phantom_args.margin_xy, "Margin from the x/y axes in meters");
    phantom->add_option("--margin-z", phantom_args.margin_z, "Sole height above z = 0 in meters");
    phantom->add_option("--out", phantom_args.out, "Output voxel file")->required();

    ValidateArgs validate_args;
    CLI::App* validate = app.add_subcommand("validate", "Check the cage against the sensor range");
    validate->add_option("--config", validate_args.config, "Scenario config file")->required();

    RunArgs run_args;
    CLI::App* run = app.add_subcommand("run", "Run a localization accuracy study");
    run->add_option("--config", run_args.config, "Scenario config file")->required();
    run->add_option("--seed", run_args.seed, "Override the scenario seed");
    run->add_option("--out", run_args.out, "Override the output directory");
    run->add_option("--threads", run_args.threads, "Worker count (results are identical for any value)");

    ReportArgs report_args;
    CLI::App* report = app.add_subcommand("report", "Export error-map grids from a finished run");
    report->add_option("--in", report_args.in_dir, "Run output directory")->required();
    report->add_option("--slice", report_args.slice, "Planar cut, e.g. x=0.3");
    report->add_option("--projection", report_args.projection, "Projection plane: xy, xz or yz");
    report->add_option("--out", report_args.out, "Output CSV path (default: inside --in)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsageError;
    }

    try {
        if (phantom->parsed()) return cmd_phantom(phantom_args);
        if (validate->parsed()) return cmd_validate(validate_args);
        if (run->parsed()) return cmd_run(run_args);
        if (report->parsed()) return cmd_report(report_args);
        return kUsageError;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDomainFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsageError;
    }
}
