#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <queue>
#include <unordered_set>

#include "magloc/body.hpp"

using namespace magloc;
namespace fs = std::filesystem;

namespace {

std::int64_t voxel_key(int ix, int iy, int iz) {
    return (static_cast<std::int64_t>(ix) << 42) ^ (static_cast<std::int64_t>(iy) << 21) ^
           static_cast<std::int64_t>(iz);
}

struct VoxelGrid {
    std::unordered_set<std::int64_t> cells;
    Vec3 origin;
    double res;

    explicit VoxelGrid(const BodyModel& body) : origin(body.bounding_box.min), res(body.resolution) {
        for (const Vec3& v : body.voxels) cells.insert(key_of(v));
    }

    std::int64_t key_of(const Vec3& v) const {
        return voxel_key(index(v.x, origin.x), index(v.y, origin.y), index(v.z, origin.z));
    }

    int index(double c, double o) const { return static_cast<int>(std::llround((c - o) / res)); }
};

// number of 6-connected components
std::size_t component_count(const BodyModel& body) {
    VoxelGrid grid(body);
    std::unordered_set<std::int64_t> unseen = grid.cells;
    std::size_t components = 0;
    while (!unseen.empty()) {
        ++components;
        std::queue<std::array<int, 3>> frontier;
        // decode one seed from the original voxel list
        for (const Vec3& v : body.voxels) {
            const std::int64_t k = grid.key_of(v);
            if (unseen.count(k)) {
                frontier.push({grid.index(v.x, grid.origin.x), grid.index(v.y, grid.origin.y),
                               grid.index(v.z, grid.origin.z)});
                unseen.erase(k);
                break;
            }
        }
        while (!frontier.empty()) {
            const auto [ix, iy, iz] = frontier.front();
            frontier.pop();
            const int d[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
            for (const auto& step : d) {
                const int nx = ix + step[0], ny = iy + step[1], nz = iz + step[2];
                const std::int64_t k = voxel_key(nx, ny, nz);
                if (unseen.erase(k) > 0) frontier.push({nx, ny, nz});
            }
        }
    }
    return components;
}

}  // namespace

TEST_CASE("default phantom voxel count lands in the expected band") {
    const BodyModel body = generate_phantom(1.75, 0.005);
    CHECK(body.voxels.size() >= 400000);
    CHECK(body.voxels.size() <= 800000);
}

TEST_CASE("voxel count scales with the cube of the resolution") {
    const BodyModel fine = generate_phantom(1.75, 0.005);
    const BodyModel coarse = generate_phantom(1.75, 0.02);
    const double ratio = static_cast<double>(fine.voxels.size()) / coarse.voxels.size();
    CHECK(ratio > 64.0 * 0.7);
    CHECK(ratio < 64.0 * 1.3);
}

TEST_CASE("phantom rejects invalid parameters") {
    CHECK_THROWS_AS(generate_phantom(1.75, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(generate_phantom(1.75, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(generate_phantom(0.0, 0.005), std::invalid_argument);
    CHECK_THROWS_AS(generate_phantom(1.75, 0.02, -0.1), std::invalid_argument);
}

TEST_CASE("phantom height and margins are honored") {
    const BodyModel body = generate_phantom(1.75, 0.02, 0.10, 0.05);  // explicit margins
    const Aabb& box = body.bounding_box;
    CHECK(box.min.x == Catch::Approx(0.10).margin(1e-12));
    CHECK(box.min.y == Catch::Approx(0.10).margin(1e-12));
    CHECK(box.min.z == Catch::Approx(0.05).margin(1e-12));
    const double span = box.max.z - box.min.z + body.resolution;
    CHECK(std::abs(span - 1.75) <= body.resolution);
    for (const Vec3& v : body.voxels) {
        CHECK(v.x >= 0.0);
        CHECK(v.y >= 0.0);
        CHECK(v.z >= 0.0);
    }
}

TEST_CASE("phantom voxels sit on a regular grid") {
    const BodyModel body = generate_phantom(1.75, 0.02);
    const Vec3 origin = body.bounding_box.min;
    for (const Vec3& v : body.voxels) {
        for (double c : {v.x - origin.x, v.y - origin.y, v.z - origin.z}) {
            const double q = c / body.resolution;
            CHECK(std::abs(q - std::round(q)) * body.resolution < 1e-12);
        }
    }
}

TEST_CASE("phantom is mirror symmetric about the sagittal plane") {
    const BodyModel body = generate_phantom(1.75, 0.02);
    VoxelGrid grid(body);
    const double mid = 0.5 * (body.bounding_box.min.x + body.bounding_box.max.x);
    for (const Vec3& v : body.voxels) {
        const Vec3 mirrored{2.0 * mid - v.x, v.y, v.z};
        CHECK(grid.cells.count(grid.key_of(mirrored)) == 1);
    }
}

TEST_CASE("phantom is a single connected component at both scales") {
    CHECK(component_count(generate_phantom(1.75, 0.02)) == 1);
    CHECK(component_count(generate_phantom(1.75, 0.005)) == 1);
}

TEST_CASE("voxel file round trip preserves the voxel set exactly") {
    const fs::path path = fs::temp_directory_path() / "magloc_test_voxels.txt";
    const BodyModel body = generate_phantom(1.75, 0.02);
    save_voxels(body, path);
    const BodyModel loaded = load_voxels(path);
    REQUIRE(loaded.voxels.size() == body.voxels.size());
    for (std::size_t i = 0; i < body.voxels.size(); ++i) {
        CHECK(loaded.voxels[i].x == body.voxels[i].x);
        CHECK(loaded.voxels[i].y == body.voxels[i].y);
        CHECK(loaded.voxels[i].z == body.voxels[i].z);
    }
    CHECK(loaded.resolution == Catch::Approx(body.resolution).epsilon(1e-12));
    fs::remove(path);
}

TEST_CASE("voxel loader accepts comments and small grids") {
    const fs::path path = fs::temp_directory_path() / "magloc_test_small_voxels.txt";
    {
        std::ofstream out(path);
        out << "# three voxels\n";
        out << "0.1,0.2,0.3\n";
        out << "0.2,0.2,0.3\n";
        out << "0.1,0.3,0.3\n";
    }
    const BodyModel body = load_voxels(path);
    CHECK(body.voxels.size() == 3);
    CHECK(body.resolution == Catch::Approx(0.1).epsilon(1e-9));
    fs::remove(path);
}

TEST_CASE("voxel loader rejects octant violations with the line number") {
    const fs::path path = fs::temp_directory_path() / "magloc_test_neg_voxels.txt";
    {
        std::ofstream out(path);
        out << "0.1,0.2,0.3\n";
        out << "0.10,-0.05,0.30\n";
    }
    try {
        load_voxels(path);
        FAIL("expected an octant violation");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find(":2:") != std::string::npos);
        CHECK(msg.find("octant") != std::string::npos);
    }
    fs::remove(path);
}

TEST_CASE("voxel loader rejects malformed and off-grid input") {
    const fs::path path = fs::temp_directory_path() / "magloc_test_bad_voxels.txt";
    {
        std::ofstream out(path);
        out << "0.1,0.2\n";
    }
    CHECK_THROWS_AS(load_voxels(path), std::runtime_error);
    {
        std::ofstream out(path);
        out << "0.1,abc,0.3\n";
    }
    CHECK_THROWS_AS(load_voxels(path), std::runtime_error);
    {
        // gaps of 0.1 and 0.15 cannot both sit on one 0.1 grid
        std::ofstream out(path);
        out << "0.1,0.1,0.1\n";
        out << "0.2,0.1,0.1\n";
        out << "0.35,0.1,0.1\n";
    }
    CHECK_THROWS_AS(load_voxels(path), std::runtime_error);
    {
        std::ofstream out(path);
        out << "# only comments\n";
    }
    CHECK_THROWS_AS(load_voxels(path), std::runtime_error);
    fs::remove(path);
    CHECK_THROWS_AS(load_voxels(path), std::runtime_error);  // missing file
}
