#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "magloc/body.hpp"
#include "magloc/sim.hpp"
#include "magloc/textio.hpp"

namespace fs = std::filesystem;

namespace {

struct CommandResult {
    int exit_code;
    std::string output;
};

CommandResult run_cli(const std::string& args) {
    const fs::path log = fs::temp_directory_path() / "magloc_cli_log.txt";
    const std::string cmd = std::string(MAGLOC_BIN) + " " + args + " >" + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream in(log);
    std::ostringstream ss;
    ss << in.rdbuf();
    int code = -1;
    if (status != -1 && WIFEXITED(status)) code = WEXITSTATUS(status);
    return {code, ss.str()};
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const fs::path kWork = fs::temp_directory_path() / "magloc_cli_work";

std::string small_scenario_text() {
    return "[wires]\n"
           "arrangement = W6\n"
           "[simulation]\n"
           "runs_per_point = 3\n"
           "seed = 11\n"
           "phantom_resolution = 0.03\n";
}

}  // namespace

TEST_CASE("phantom subcommand writes a loadable voxel file") {
    fs::create_directories(kWork);
    const fs::path out = kWork / "voxels.txt";
    const auto result =
        run_cli("phantom --height 1.75 --resolution 0.03 --margin-xy 0.05 --out " + out.string());
    CHECK(result.exit_code == 0);
    CHECK(result.output.find("voxels:") != std::string::npos);
    const magloc::BodyModel body = magloc::load_voxels(out);
    CHECK(body.voxels.size() > 1000);
    CHECK(body.resolution == Catch::Approx(0.03).epsilon(1e-9));
}

TEST_CASE("phantom subcommand rejects missing flags and bad values") {
    CHECK(run_cli("phantom --height 1.75").exit_code == 2);           // no --out
    CHECK(run_cli("phantom --nonsense 1 --out x").exit_code == 2);    // unknown flag
    const fs::path out = kWork / "bad_voxels.txt";
    CHECK(run_cli("phantom --resolution 0.5 --out " + out.string()).exit_code == 2);
}

TEST_CASE("validate subcommand reports the saturation state") {
    fs::create_directories(kWork);
    const fs::path cfg = kWork / "scenario.cfg";
    {
        std::ofstream out(cfg);
        out << small_scenario_text();
    }
    const auto good = run_cli("validate --config " + cfg.string());
    CHECK(good.exit_code == 0);
    CHECK(good.output.find("max in-body field") != std::string::npos);
    CHECK(good.output.find("ok") != std::string::npos);

    // a cage wire routed through a voxel center saturates the sensor
    const magloc::BodyModel body = magloc::generate_phantom(1.75, 0.03);
    const magloc::Vec3 inside = body.voxels[body.voxels.size() / 2];
    const fs::path wires = kWork / "hot.wires";
    {
        std::ofstream out(wires);
        out << "axis=Z offset_a=" << magloc::format_double(inside.x)
            << " offset_b=" << magloc::format_double(inside.y) << " current=100\n";
        out << "axis=Z offset_a=5 offset_b=0 current=100\n";
        out << "axis=Z offset_a=0 offset_b=5 current=100\n";
        out << "axis=Y offset_a=5 offset_b=5 current=100\n";
        out << "axis=Y offset_a=6 offset_b=5 current=100\n";
        out << "axis=Y offset_a=5 offset_b=6 current=100\n";
    }
    const fs::path hot_cfg = kWork / "hot.cfg";
    {
        std::ofstream out(hot_cfg);
        out << "[wires]\nfile = " << wires.string() << "\n[simulation]\nphantom_resolution = 0.03\n";
    }
    CHECK(run_cli("validate --config " + hot_cfg.string()).exit_code == 1);

    const fs::path broken = kWork / "broken.cfg";
    {
        std::ofstream out(broken);
        out << "[wires]\narrangement = W6\nuh-oh\n";
    }
    CHECK(run_cli("validate --config " + broken.string()).exit_code == 2);
    CHECK(run_cli("validate --config missing_file.cfg").exit_code == 2);
}

TEST_CASE("run subcommand is deterministic across reruns and worker counts") {
    fs::create_directories(kWork);
    const fs::path cfg = kWork / "scenario.cfg";
    {
        std::ofstream out(cfg);
        out << small_scenario_text();
    }
    const fs::path out_a = kWork / "run_a";
    const fs::path out_b = kWork / "run_b";
    fs::remove_all(out_a);
    fs::remove_all(out_b);

    const auto first =
        run_cli("run --config " + cfg.string() + " --out " + out_a.string() + " --threads 1");
    REQUIRE(first.exit_code == 0);
    CHECK(first.output.find("median position error") != std::string::npos);
    const auto second =
        run_cli("run --config " + cfg.string() + " --out " + out_b.string() + " --threads 4");
    REQUIRE(second.exit_code == 0);

    CHECK(read_file(out_a / "points.csv") == read_file(out_b / "points.csv"));
    CHECK(read_file(out_a / "summary.txt").find("Median position error") != std::string::npos);
    CHECK(read_file(out_a / "manifest.txt").find("wire.0 = axis=") != std::string::npos);

    // a different seed changes the results
    const fs::path out_c = kWork / "run_c";
    fs::remove_all(out_c);
    REQUIRE(run_cli("run --config " + cfg.string() + " --out " + out_c.string() + " --seed 99")
                .exit_code == 0);
    CHECK(read_file(out_a / "points.csv") != read_file(out_c / "points.csv"));
}

TEST_CASE("report subcommand exports slice and projection maps") {
    // relies on the run outputs of the previous test; rebuild them if gone
    const fs::path out_a = kWork / "run_a";
    if (!fs::exists(out_a / "points.csv")) {
        const fs::path cfg = kWork / "scenario.cfg";
        std::ofstream(cfg) << small_scenario_text();
        REQUIRE(run_cli("run --config " + cfg.string() + " --out " + out_a.string()).exit_code == 0);
    }
    const auto points = magloc::load_points_csv(out_a / "points.csv");
    const double mid_x = points[points.size() / 2].voxel.x;

    const auto slice = run_cli("report --in " + out_a.string() + " --slice x=" +
                               magloc::format_double(mid_x));
    CHECK(slice.exit_code == 0);
    CHECK(slice.output.find("written:") != std::string::npos);

    const auto projection = run_cli("report --in " + out_a.string() + " --projection xz");
    CHECK(projection.exit_code == 0);
    CHECK(fs::exists(out_a / "map_projection_xz.csv"));
    const std::string grid = read_file(out_a / "map_projection_xz.csv");
    CHECK(grid.find("Z\\X") != std::string::npos);

    CHECK(run_cli("report --in " + out_a.string() + " --slice x=99").exit_code == 1);
    CHECK(run_cli("report --in " + out_a.string()).exit_code == 2);  // neither mode
    CHECK(run_cli("report --in " + out_a.string() + " --slice x=0.1 --projection xz").exit_code ==
          2);
    CHECK(run_cli("report --in no_such_dir --projection xz").exit_code == 2);
}

TEST_CASE("top-level usage errors exit with 2") {
    CHECK(run_cli("").exit_code == 2);
    CHECK(run_cli("frobnicate").exit_code == 2);
    CHECK(run_cli("--help").exit_code == 0);
}
