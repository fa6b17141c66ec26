#include <catch2/catch.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "levyexit/csv_io.hpp"

using namespace levyexit;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("levyexit_csv_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

} // namespace

TEST_CASE("profile round trip is bitwise exact") {
    TempDir tmp;
    Profile p;
    p.xs = {-1.0 / 3.0, 0.1, 0.30000000000000004, 7e300};
    p.values = {1.0 / 7.0, -2.5e-17, 3.141592653589793, 0.0};
    const fs::path file = tmp.path / "profile.csv";
    write_profile(p, file);

    const ObservationSet back = read_observations(file, ProfileKind::mean_exit_time);
    REQUIRE(back.xs.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(back.xs[i] == p.xs[i]);
        CHECK(back.values[i] == p.values[i]);
    }
}

TEST_CASE("three-column profiles carry standard errors") {
    TempDir tmp;
    Profile p;
    p.xs = {0.0, 0.5};
    p.values = {1.25, 0.75};
    p.stderrs = {0.01, 0.02};
    const fs::path file = tmp.path / "mc.csv";
    write_profile(p, file);

    std::ifstream in(file);
    std::string header;
    std::getline(in, header);
    CHECK(header == "x,value,stderr");

    // the third column is accepted and ignored on ingest
    const ObservationSet back = read_observations(file, ProfileKind::mean_exit_time);
    CHECK(back.values == std::vector<double>{1.25, 0.75});
}

TEST_CASE("empty profile writes a header-only file") {
    TempDir tmp;
    const fs::path file = tmp.path / "empty.csv";
    write_profile(Profile{}, file);
    std::ifstream in(file);
    std::string line;
    std::getline(in, line);
    CHECK(line == "x,value");
    CHECK_FALSE(std::getline(in, line));
}

TEST_CASE("observation ingestion") {
    TempDir tmp;
    const fs::path file = tmp.path / "obs.csv";

    SECTION("two simple rows") {
        write_file(file, "x,value\n0,1.0\n0.5,0.8\n");
        const ObservationSet obs = read_observations(file, ProfileKind::mean_exit_time);
        CHECK(obs.xs == std::vector<double>{0.0, 0.5});
        CHECK(obs.values == std::vector<double>{1.0, 0.8});
    }
    SECTION("rows are sorted by x on ingest") {
        write_file(file, "x,value\n0.5,2\n-0.5,1\n0,3\n");
        const ObservationSet obs = read_observations(file, ProfileKind::mean_exit_time);
        CHECK(obs.xs == std::vector<double>{-0.5, 0.0, 0.5});
        CHECK(obs.values == std::vector<double>{1.0, 3.0, 2.0});
    }
    SECTION("malformed number names the line") {
        write_file(file, "x,value\n0,abc\n");
        try {
            read_observations(file, ProfileKind::mean_exit_time);
            FAIL("expected CsvError");
        } catch (const CsvError& e) {
            CHECK(e.line() == 2);
            CHECK(std::string(e.what()).find(":2:") != std::string::npos);
        }
    }
    SECTION("duplicate x is rejected") {
        write_file(file, "x,value\n0,1\n0.5,2\n0,3\n");
        CHECK_THROWS_AS(read_observations(file, ProfileKind::mean_exit_time), CsvError);
    }
    SECTION("escape probabilities outside [0,1] are rejected") {
        write_file(file, "x,value\n0,1.5\n");
        CHECK_THROWS_AS(read_observations(file, ProfileKind::escape_probability), CsvError);
        const ObservationSet ok = read_observations(file, ProfileKind::mean_exit_time);
        CHECK(ok.values == std::vector<double>{1.5});
    }
    SECTION("bad header and missing file") {
        write_file(file, "a,b\n0,1\n");
        CHECK_THROWS_AS(read_observations(file, ProfileKind::mean_exit_time), CsvError);
        CHECK_THROWS_AS(read_observations(tmp.path / "nope.csv", ProfileKind::mean_exit_time),
                        std::runtime_error);
    }
    SECTION("windows line endings are tolerated") {
        write_file(file, "x,value\r\n0,1\r\n0.5,2\r\n");
        const ObservationSet obs = read_observations(file, ProfileKind::mean_exit_time);
        CHECK(obs.xs.size() == 2);
    }
}

TEST_CASE("objective is invariant under observation file row order") {
    TempDir tmp;
    const fs::path a = tmp.path / "a.csv";
    const fs::path b = tmp.path / "b.csv";
    write_file(a, "x,value\n-0.5,1\n0,2\n0.5,1.5\n");
    write_file(b, "x,value\n0.5,1.5\n-0.5,1\n0,2\n");
    const ObservationSet oa = read_observations(a, ProfileKind::mean_exit_time);
    const ObservationSet ob = read_observations(b, ProfileKind::mean_exit_time);
    CHECK(oa.xs == ob.xs);
    CHECK(oa.values == ob.values);

    Profile model;
    model.xs = {-0.6, 0.0, 0.6};
    model.values = {1.1, 1.9, 1.4};
    CHECK(relative_l2_objective(model, oa) == relative_l2_objective(model, ob));
}
