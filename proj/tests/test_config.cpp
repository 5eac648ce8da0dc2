#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "hetfuse/cli.hpp"
#include "hetfuse/configfile.hpp"
#include "hetfuse/plotting.hpp"

using namespace hetfuse;
namespace fs = std::filesystem;

TEST_CASE("config map: schema, defaults, overrides and type parsing") {
    ConfigMap m;
    m.declare("a.x", "3", "an int");
    m.declare("a.y", "0.5", "a real");
    m.declare("a.z", "true", "a flag");
    m.declare("a.list", "1,2,3", "a list");

    CHECK(m.get_int("a.x") == 3);
    CHECK(m.get_double("a.y") == 0.5);
    CHECK(m.get_bool("a.z"));
    CHECK(m.get_int_list("a.list") == std::vector<int64_t>({1, 2, 3}));

    m.apply_override("a.x=7");
    CHECK(m.get_int("a.x") == 7);

    CHECK_THROWS_AS(m.set("nope", "1"), Error);
    try {
        m.apply_override("foo.bar=1");
        FAIL("expected usage error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Usage);
        CHECK(std::string(e.what()).find("foo.bar") != std::string::npos);
    }
    CHECK_THROWS_AS(m.get_int("a.y"), Error);  // 0.5 is not an integer
}

TEST_CASE("config map: file loading with comments and blank lines") {
    ConfigMap m;
    m.declare("k.alpha", "0", "");
    m.declare("k.beta", "x", "");
    const auto path = fs::temp_directory_path() / "hetfuse_cfg_test.txt";
    std::ofstream(path) << "# comment\n\nk.alpha = 42   # trailing\n   k.beta = hello world \n";
    m.load_file(path);
    CHECK(m.get_int("k.alpha") == 42);
    CHECK(m.get_str("k.beta") == "hello world");

    std::ofstream(path) << "not-a-kv-line\n";
    CHECK_THROWS_AS(m.load_file(path), Error);
}

TEST_CASE("config map: resolved echo covers every declared key") {
    ConfigMap m;
    m.declare("one", "1", "");
    m.declare("two", "2", "");
    m.apply_override("two=22");
    const auto path = fs::temp_directory_path() / "hetfuse_cfg_echo.txt";
    m.write_resolved(path);
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(text.find("one = 1") != std::string::npos);
    CHECK(text.find("two = 22") != std::string::npos);
}

TEST_CASE("cli parse: flags, overrides, help") {
    using namespace hetfuse::cli;
    const auto inv = parse_args({"train", "--config", "c.txt", "--set", "a=1", "--set", "b=2",
                                 "--out", "o", "--seed", "9"});
    CHECK(inv.subcommand == "train");
    REQUIRE(inv.config_path.has_value());
    CHECK(inv.overrides.size() == 2);
    CHECK(inv.out_dir == fs::path("o"));
    CHECK(inv.seed == 9);

    CHECK(parse_args({}).help);
    CHECK(parse_args({"--help"}).help);
    CHECK_THROWS_AS(parse_args({"train", "--bogus"}), Error);
}

TEST_CASE("cli schema help enumerates every accepted key") {
    for (const auto& sub : hetfuse::cli::subcommands()) {
        const auto schema = hetfuse::cli::schema_for(sub);
        const auto help = schema.help();
        for (const auto& [key, info] : schema.schema())
            CHECK(help.find(key) != std::string::npos);
    }
    CHECK_THROWS_AS(hetfuse::cli::schema_for("nope"), Error);
}

TEST_CASE("svg plotting writes well-formed files") {
    const auto path = fs::temp_directory_path() / "hetfuse_plot_test.svg";
    PlotSeries s1{"a", {{0, 0.9}, {4, 0.7}, {8, 0.5}}};
    PlotSeries s2{"b", {{0, 0.9}, {4, 0.85}, {8, 0.8}}};
    write_svg_lineplot(path, "t", "x", "y", {s1, s2});
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(text.rfind("<svg", 0) == 0);
    CHECK(text.find("polyline") != std::string::npos);
    CHECK(text.find("</svg>") != std::string::npos);
    CHECK_THROWS_AS(write_svg_lineplot(path, "t", "x", "y", {}), Error);
}
