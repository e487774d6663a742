#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "phsmm/io.hpp"

using namespace phsmm;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& content) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("dataset csv round trip") {
    Dataset d;
    d.channel_names = {"step", "angle"};
    d.records = {{1.5, -0.25}, {std::nullopt, 0.5}, {0.0, std::nullopt}};
    const auto path = write_temp("phsmm_io_rt.csv", dataset_to_csv(d));
    const auto back = read_dataset_csv(path.string());
    REQUIRE(back.channel_names == d.channel_names);
    REQUIRE(back.records.size() == 3);
    CHECK(back.records[0][0] == 1.5);
    CHECK(back.records[0][1] == -0.25);
    CHECK_FALSE(back.records[1][0].has_value());
    CHECK(back.records[1][1] == 0.5);
    CHECK(back.records[2][0] == 0.0);
    CHECK_FALSE(back.records[2][1].has_value());
}

TEST_CASE("csv errors carry line numbers") {
    SECTION("empty file") {
        const auto path = write_temp("phsmm_io_empty.csv", "");
        CHECK_THROWS_AS(read_dataset_csv(path.string()), DataError);
    }
    SECTION("field count mismatch") {
        const auto path = write_temp("phsmm_io_badrow.csv", "a,b\n1.0,2.0\n3.0\n");
        CHECK_THROWS_WITH(read_dataset_csv(path.string()),
                          Catch::Matchers::ContainsSubstring(":3:"));
    }
    SECTION("unparseable value") {
        const auto path = write_temp("phsmm_io_badval.csv", "a,b\n1.0,zebra\n");
        CHECK_THROWS_WITH(read_dataset_csv(path.string()),
                          Catch::Matchers::ContainsSubstring("zebra"));
    }
    SECTION("missing file") {
        CHECK_THROWS_AS(read_dataset_csv("/nonexistent/phsmm.csv"), DataError);
    }
}

TEST_CASE("key-value config parsing") {
    const auto cfg = KeyValueConfig::from_string(
        "model.n_states = 3  # comment\n"
        "penalty.lambda = 10, 100, 1000\n"
        "data.input = /tmp/in.csv\n"
        "\n"
        "# full-line comment\n"
        "optim.tol = 1e-8\n");
    CHECK(cfg.get_int("model.n_states") == 3);
    CHECK(cfg.get_double_list("penalty.lambda") == std::vector<double>{10.0, 100.0, 1000.0});
    CHECK(cfg.get_string("data.input") == "/tmp/in.csv");
    CHECK(cfg.get_double("optim.tol") == 1e-8);
    CHECK(cfg.get_int("missing.key", 42) == 42);

    SECTION("errors name the offending key") {
        CHECK_THROWS_WITH(cfg.get_double("data.input"),
                          Catch::Matchers::ContainsSubstring("data.input"));
        CHECK_THROWS_WITH(cfg.get_string("nope"), Catch::Matchers::ContainsSubstring("nope"));
    }
    SECTION("malformed lines rejected") {
        CHECK_THROWS_AS(KeyValueConfig::from_string("just some text\n"), ConfigError);
        CHECK_THROWS_AS(KeyValueConfig::from_string("= value\n"), ConfigError);
    }
}

TEST_CASE("atomic write replaces the target completely") {
    const auto path = std::filesystem::temp_directory_path() / "phsmm_io_atomic.txt";
    atomic_write(path.string(), "first version, longer content\n");
    atomic_write(path.string(), "second\n");
    std::ifstream in(path);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(content == "second\n");
    CHECK_FALSE(std::filesystem::exists(path.string() + ".tmp"));
}
