#include <cmath>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "l4twist/io.hpp"

using namespace l4twist;

TEST(Format, NumberRoundTrips)
{
    for (double v : {0.0, 1.0, 0.1, 1.0 / 3.0, 0.0091523, -2.5e-17, 1e300}) {
        EXPECT_EQ(std::stod(format_number(v)), v);
    }
    EXPECT_EQ(format_number(NAN), "nan");
    EXPECT_EQ(format_number(-INFINITY), "-inf");
}

TEST(Format, FileNames)
{
    EXPECT_EQ(parameter_file_name("profile", 0.00914, 0.02, "csv"), "profile_mu0.009140_E0.020000.csv");
    EXPECT_EQ(parameter_file_name("nf", 0.0097, "json"), "nf_mu0.009700.json");
}

TEST(Csv, Quoting)
{
    EXPECT_EQ(csv_field("plain"), "plain");
    EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
    EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    std::ostringstream os;
    CsvWriter w(os);
    w.header({"x", "y"});
    w.field(0.5).field(std::string_view("u,v"));
    w.end_row();
    EXPECT_EQ(os.str(), "x,y\n0.5,\"u,v\"\n");
}

TEST(Json, WriterProducesValidJson)
{
    std::ostringstream os;
    JsonWriter w(os);
    w.begin_object();
    w.member("name", "a\"b\\c\n");
    w.member("x", 1.0 / 3.0);
    w.member("bad", NAN);
    w.member("n", 3);
    w.member("ok", true);
    w.key("list").begin_array().value(1.0).value(2.0).begin_object().member("k", "v").end_object().end_array();
    w.end_object();
    const auto j = nlohmann::json::parse(os.str());
    EXPECT_EQ(j["name"], "a\"b\\c\n");
    EXPECT_EQ(j["x"].get<double>(), 1.0 / 3.0);
    EXPECT_TRUE(j["bad"].is_null());
    EXPECT_EQ(j["n"], 3);
    EXPECT_EQ(j["ok"], true);
    EXPECT_EQ(j["list"].size(), 3u);
    EXPECT_EQ(j["list"][2]["k"], "v");
}

TEST(Json, ControlCharactersEscaped)
{
    EXPECT_EQ(json_string(std::string("\x01", 1)), "\"\\u0001\"");
    EXPECT_EQ(json_number(INFINITY), "null");
}
