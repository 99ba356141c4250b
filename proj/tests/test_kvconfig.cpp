#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "bump/errors.hpp"
#include "bump/kvconfig.hpp"

using namespace bump;
using namespace bump::kvconfig;
namespace fs = std::filesystem;

TEST_CASE("parses typed values, comments and blank lines") {
    const auto c = Config::parse(
        "# dataset block\n"
        "count = 2000\n"
        "seed=42\n"
        "split = 0.8   # trailing comment\n"
        "\n"
        "bump.x0 = 4.59\n"
        "flag = true\n"
        "other = false\n"
        "name = \"out dir # not a comment\"\n"
        "negative = -3\n");

    CHECK(c.get_uint("count") == 2000);
    CHECK(c.get_int("seed") == 42);
    CHECK(c.get_double("split") == doctest::Approx(0.8));
    CHECK(c.get_double("bump.x0") == doctest::Approx(4.59));
    CHECK(c.get_bool("flag"));
    CHECK(!c.get_bool("other"));
    CHECK(c.get_string("name") == "out dir # not a comment");
    CHECK(c.get_int("negative") == -3);
    CHECK(c.has("count"));
    CHECK(!c.has("missing"));
    CHECK(c.entries().size() == 8);
}

TEST_CASE("missing keys throw from getters and are nullopt from maybes") {
    const auto c = Config::parse("a = 1\n");
    CHECK_THROWS_AS(c.get_double("b"), config_error);
    CHECK_THROWS_AS(c.get_string("b"), config_error);
    CHECK(!c.maybe_double("b").has_value());
    CHECK(!c.maybe_bool("b").has_value());
    CHECK(c.maybe_int("a").value() == 1);
}

TEST_CASE("bad conversions are config errors") {
    const auto c = Config::parse("word = hello\nfrac = 0.5\nbig = 99banana\n");
    CHECK_THROWS_AS(c.get_double("word"), config_error);
    CHECK_THROWS_AS(c.get_int("frac"), config_error);
    CHECK_THROWS_AS(c.get_uint("big"), config_error);
    CHECK_THROWS_AS(c.get_bool("word"), config_error);
    CHECK_THROWS_AS(c.maybe_double("word"), config_error);
    CHECK(c.get_string("word") == "hello");
}

TEST_CASE("negative numbers do not convert to unsigned") {
    const auto c = Config::parse("n = -5\n");
    CHECK(c.get_int("n") == -5);
    CHECK_THROWS_AS(c.get_uint("n"), config_error);
}

TEST_CASE("malformed lines and duplicates are rejected") {
    CHECK_THROWS_AS(Config::parse("just a line without equals\n"), config_error);
    CHECK_THROWS_AS(Config::parse("= 5\n"), config_error);
    CHECK_THROWS_AS(Config::parse("a = 1\na = 2\n"), config_error);
    CHECK_THROWS_AS(Config::parse("bad key! = 1\n"), config_error);
    CHECK_THROWS_AS(Config::parse("a..b = 1\n"), config_error);
    CHECK_THROWS_AS(Config::parse("x = \"unterminated\n"), config_error);
    CHECK_NOTHROW(Config::parse("a.b.c = 1\n"));
}

TEST_CASE("restrict_keys flags unknown keys") {
    const auto c = Config::parse("count = 5\nseeed = 1\n");
    CHECK_THROWS_AS(c.restrict_keys({"count", "seed"}), config_error);
    CHECK_NOTHROW(c.restrict_keys({"count", "seeed"}));
    try {
        c.restrict_keys({"count"});
    } catch (const config_error& e) {
        CHECK(std::string(e.what()).find("seeed") != std::string::npos);
    }
}

TEST_CASE("load reads files and reports the path on errors") {
    const auto path = fs::temp_directory_path() / "kvconfig_test.conf";
    {
        std::ofstream out(path);
        out << "alpha = 1.5\n";
    }
    const auto c = Config::load(path);
    CHECK(c.get_double("alpha") == doctest::Approx(1.5));

    {
        std::ofstream out(path);
        out << "broken line\n";
    }
    try {
        Config::load(path);
        CHECK(false);
    } catch (const config_error& e) {
        CHECK(std::string(e.what()).find("kvconfig_test.conf") != std::string::npos);
    }
    fs::remove(path);
    CHECK_THROWS_AS(Config::load(path), io_error);
}
