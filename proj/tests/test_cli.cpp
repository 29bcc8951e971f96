#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "lvchaos/io.hpp"
#include "oracles.hpp"

using namespace lvchaos;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path source(const std::string& rel) { return fs::path(LVCHAOS_SOURCE_DIR) / rel; }

std::string ref_text() { return slurp(source("configs/ref.json")); }

Json ref_json() { return Json::parse(ref_text()); }

// Minimal JSON Schema (draft-07 subset) checker: type, const, enum, required,
// properties, additionalProperties=false, items, min/maxItems, numeric bounds
// and local $ref. Returns the first violation, empty when valid.
class SchemaCheck {
 public:
  explicit SchemaCheck(Json root) : root_(std::move(root)) {}

  std::string validate(const Json& doc) const { return check(root_, doc, "$"); }

 private:
  Json root_;

  static bool has_type(const Json& v, const std::string& t) {
    if (t == "object") return v.is_object();
    if (t == "array") return v.is_array();
    if (t == "string") return v.is_string();
    if (t == "boolean") return v.is_boolean();
    if (t == "null") return v.is_null();
    if (t == "number") return v.is_number();
    if (t == "integer") return v.is_number_integer() || (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>());
    return false;
  }

  const Json& resolve(const std::string& ref) const {
    const std::string prefix = "#/definitions/";
    if (ref.rfind(prefix, 0) != 0) throw std::runtime_error("unsupported $ref " + ref);
    return root_.at("definitions").at(ref.substr(prefix.size()));
  }

  std::string check(const Json& s, const Json& v, const std::string& at) const {
    if (s.contains("$ref")) return check(resolve(s.at("$ref").get<std::string>()), v, at);
    if (s.contains("type")) {
      bool ok = false;
      if (s.at("type").is_array()) {
        for (const auto& t : s.at("type")) ok = ok || has_type(v, t.get<std::string>());
      } else {
        ok = has_type(v, s.at("type").get<std::string>());
      }
      if (!ok) return at + ": wrong type";
    }
    if (s.contains("const") && s.at("const") != v) return at + ": const mismatch";
    if (s.contains("enum")) {
      bool ok = false;
      for (const auto& e : s.at("enum")) ok = ok || e == v;
      if (!ok) return at + ": not in enum";
    }
    if (v.is_number()) {
      const double x = v.get<double>();
      if (s.contains("minimum") && x < s.at("minimum").get<double>()) return at + ": below minimum";
      if (s.contains("maximum") && x > s.at("maximum").get<double>()) return at + ": above maximum";
      if (s.contains("exclusiveMinimum") && !(x > s.at("exclusiveMinimum").get<double>())) return at + ": not above minimum";
    }
    if (v.is_object()) {
      if (s.contains("required")) {
        for (const auto& k : s.at("required")) {
          if (!v.contains(k.get<std::string>())) return at + ": missing " + k.get<std::string>();
        }
      }
      const Json props = s.value("properties", Json::object());
      for (const auto& [k, sub] : v.items()) {
        if (props.contains(k)) {
          const std::string r = check(props.at(k), sub, at + "." + k);
          if (!r.empty()) return r;
        } else if (s.contains("additionalProperties") && s.at("additionalProperties") == false) {
          return at + ": unexpected key " + k;
        }
      }
    }
    if (v.is_array()) {
      if (s.contains("minItems") && v.size() < s.at("minItems").get<std::size_t>()) return at + ": too few items";
      if (s.contains("maxItems") && v.size() > s.at("maxItems").get<std::size_t>()) return at + ": too many items";
      if (s.contains("items")) {
        for (std::size_t i = 0; i < v.size(); ++i) {
          const std::string r = check(s.at("items"), v[i], at + "[" + std::to_string(i) + "]");
          if (!r.empty()) return r;
        }
      }
    }
    return {};
  }
};

const SchemaCheck& schema() {
  static const SchemaCheck s(Json::parse(slurp(source("docs/certificate.schema.json"))));
  return s;
}

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

class CliTest : public ::testing::Test {
 protected:
  fs::path dir;

  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir = fs::temp_directory_path() / (std::string("lvchaos_cli_") + info->name() + "_" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  fs::path write_config(const Json& j, const std::string& name = "config.json") const {
    const fs::path p = dir / name;
    std::ofstream(p) << j.dump(2);
    return p;
  }

  CliRun run(const std::string& args) const {
    const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
    const std::string cmd = std::string("\"") + LVCHAOS_CLI + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                            err.string() + "\"";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
  }
};

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string l;
  while (std::getline(is, l)) out.push_back(l);
  return out;
}

}  // namespace

TEST(Config, ParsesReference) {
  const RunConfig c = parse_config_text(ref_text());
  EXPECT_EQ(c.params.a, 1.0);
  EXPECT_EQ(c.mu, 0.2);
  EXPECT_EQ(c.ell1, 2.2);
  EXPECT_EQ(c.h2, 2.34);
  EXPECT_EQ(c.m1, 2);
  EXPECT_EQ(c.m2, 1);
  EXPECT_FALSE(c.r0);
  EXPECT_EQ(c.paths, 3);
  const Schedule s = c.schedule();
  EXPECT_EQ(s.r0, 755.0);
  EXPECT_EQ(s.rmu, 1507.0);
}

TEST(Config, RejectsUnknownKeys) {
  Json j = ref_json();
  j["colour"] = "red";
  EXPECT_THROW(parse_config(j), ConfigError);
  j = ref_json();
  j["levels"]["ell3"] = 2.9;
  EXPECT_THROW(parse_config(j), ConfigError);
  j = ref_json();
  j["search"] = {{"grid", 64}};
  EXPECT_THROW(parse_config(j), ConfigError);
}

TEST(Config, RevalidatesInvariants) {
  Json j = ref_json();
  j["mu"] = 1.5;
  EXPECT_THROW(parse_config(j), MuOutOfRange);
  j = ref_json();
  j["levels"]["ell1"] = 1.9;
  EXPECT_THROW(parse_config(j), LevelBelowMinimum);
  j = ref_json();
  j["m1"] = 1.5;
  EXPECT_THROW(parse_config(j), ConfigError);
  j = ref_json();
  j.erase("mu");
  EXPECT_THROW(parse_config(j), ConfigError);
  j = ref_json();
  j["r0"] = -3;
  EXPECT_THROW(parse_config(j), ConfigError);
  EXPECT_THROW(parse_config_text("{not json"), ConfigError);
}

TEST(Config, RoundTripsThroughEcho) {
  Json j = ref_json();
  j["r0"] = 800;
  j["tolerances"] = {{"rel_tol", 1e-11}};
  const RunConfig a = parse_config(j);
  const RunConfig b = parse_config(config_json(a));
  EXPECT_EQ(to_text(config_json(a)), to_text(config_json(b)));
  EXPECT_EQ(*b.r0, 800.0);
  EXPECT_EQ(b.tol.rel_tol, 1e-11);
}

TEST(Json, SeventeenDigitFloats) {
  const std::string t = to_text(Json{{"x", 0.1}, {"y", 2.0}, {"z", 1e-10}});
  EXPECT_NE(t.find("0.10000000000000001"), std::string::npos) << t;
  EXPECT_EQ(Json::parse(t).at("x").get<double>(), 0.1);
}

TEST(Certificate, MatchesSchemaAndIsDeterministic) {
  const RunConfig c = parse_config_text(ref_text());
  const std::string a = to_text(certificate_json(certify(c.certify_request()), c));
  const std::string b = to_text(certificate_json(certify(c.certify_request()), c));
  EXPECT_EQ(a, b);
  const Json doc = Json::parse(a);
  EXPECT_EQ(schema().validate(doc), "");
  EXPECT_TRUE(doc.at("verdict").at("certified").get<bool>());
  EXPECT_EQ(doc.at("bounds").at("n_star").get<long>(), 111);
  EXPECT_EQ(doc.at("bounds").at("n_star_star").get<long>(), 221);
}

TEST(Certificate, SchemaRejectsBrokenDocuments) {
  const RunConfig c = parse_config_text(ref_text());
  CertifyRequest req = c.certify_request();
  req.r0 = 1.0;
  const Json doc = certificate_json(certify(req), c);
  EXPECT_EQ(schema().validate(doc), "");
  Json bad = doc;
  bad.erase("verdict");
  EXPECT_NE(schema().validate(bad), "");
  bad = doc;
  bad["linking"]["linked"] = "yes";
  EXPECT_NE(schema().validate(bad), "");
  bad = doc;
  bad["extra"] = 1;
  EXPECT_NE(schema().validate(bad), "");
}

TEST(PlotData, ReferenceGeometry) {
  const RunConfig c = parse_config_text(ref_text());
  const Json j = plot_json(c, 16);
  EXPECT_TRUE(j.at("linked").get<bool>());
  for (const char* a : {"annulusP", "annulusQ"}) {
    EXPECT_EQ(j.at(a).at("inner").size(), 16u);
    EXPECT_EQ(j.at(a).at("outer").size(), 16u);
  }
  EXPECT_FALSE(j.at("rect1").empty());
  EXPECT_FALSE(j.at("rect2").empty());
  EXPECT_EQ(j.at("line_r").size(), 2u);
  // rect1 sits below r, rect2 above.
  for (const auto& z : j.at("rect1")) EXPECT_LE(z[0].get<double>() + z[1].get<double>() - 2.0, 1e-9);
  for (const auto& z : j.at("rect2")) EXPECT_GE(z[0].get<double>() + z[1].get<double>() - 2.0, -1e-9);
  for (const auto& z : j.at("annulusP").at("inner")) {
    const double e = oracle::Field{1, 1, 1, 1}.energy({z[0].get<double>(), z[1].get<double>()});
    EXPECT_NEAR(e, 2.2, 1e-10);
  }
}

TEST_F(CliTest, CertifyExitCodes) {
  const CliRun ok = run("--config \"" + source("configs/ref.json").string() + "\" certify");
  EXPECT_EQ(ok.code, 0) << ok.err;
  const Json doc = Json::parse(ok.out);
  EXPECT_TRUE(doc.at("verdict").at("certified").get<bool>());
  EXPECT_EQ(schema().validate(doc), "");

  Json j = ref_json();
  j["r0"] = 1;
  const CliRun short_r0 = run("--config \"" + write_config(j).string() + "\" certify");
  EXPECT_EQ(short_r0.code, 1) << short_r0.err;
  EXPECT_FALSE(Json::parse(short_r0.out).at("verdict").at("certified").get<bool>());

  j = ref_json();
  j["mu"] = 1.5;
  const CliRun bad_mu = run("--config \"" + write_config(j).string() + "\" certify");
  EXPECT_EQ(bad_mu.code, 2);
  EXPECT_EQ(lines(bad_mu.err).size(), 1u) << bad_mu.err;
  EXPECT_EQ(bad_mu.err.rfind("error: ", 0), 0u);
}

TEST_F(CliTest, OutputIsByteIdenticalAcrossRuns) {
  const std::string cfg = source("configs/ref.json").string();
  const fs::path a = dir / "a.json", b = dir / "b.json";
  EXPECT_EQ(run("--config \"" + cfg + "\" --out \"" + a.string() + "\" certify").code, 0);
  EXPECT_EQ(run("certify --config \"" + cfg + "\" --out \"" + b.string() + "\"").code, 0);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_FALSE(slurp(a).empty());
}

TEST_F(CliTest, MalformedInputIsExitTwo) {
  const fs::path p = dir / "broken.json";
  std::ofstream(p) << "{\"params\": ";
  const CliRun r = run("--config \"" + p.string() + "\" certify");
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(lines(r.err).size(), 1u);
  Json j = ref_json();
  j["unknown"] = true;
  EXPECT_EQ(run("--config \"" + write_config(j).string() + "\" certify").code, 2);
  EXPECT_EQ(run("--config \"" + (dir / "missing.json").string() + "\" certify").code, 2);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
}

TEST_F(CliTest, PeriodMap) {
  const CliRun r = run("period-map --from 2.0001 --to 3.5 --n 50");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(r.out);
  ASSERT_EQ(rows.size(), 51u);
  EXPECT_EQ(rows[0], "level,period");
  double prev = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double tau = std::stod(rows[i].substr(rows[i].find(',') + 1));
    EXPECT_GT(tau, prev);
    prev = tau;
  }
  EXPECT_NEAR(std::stod(rows[1].substr(rows[1].find(',') + 1)), 2 * std::numbers::pi, 1e-3);

  const CliRun one = run("period-map --from 2.5 --to 2.5 --n 1");
  EXPECT_EQ(one.code, 0);
  EXPECT_EQ(lines(one.out).size(), 2u);

  EXPECT_EQ(run("period-map --from 1.5 --to 2.5 --n 5").code, 2);
  EXPECT_EQ(run("period-map --from 2.5 --to 2.2 --n 5").code, 2);

  const CliRun harv = run("--config \"" + source("configs/ref.json").string() +
                       "\" period-map --field harvested --from 1.96 --to 2.5 --n 3");
  EXPECT_EQ(harv.code, 0) << harv.err;
}

TEST_F(CliTest, FindPeriodic) {
  const std::string cfg = "--config \"" + source("configs/ref.json").string() + "\" ";
  const fs::path csv = dir / "orbit.csv";
  const CliRun a = run(cfg + "find-periodic --word 00 --csv \"" + csv.string() + "\"");
  ASSERT_EQ(a.code, 0) << a.err;
  const Json ja = Json::parse(a.out);
  EXPECT_EQ(ja.at("status"), "found");
  EXPECT_EQ(ja.at("orbit").at("period").get<int>(), 1);
  EXPECT_LE(ja.at("orbit").at("residual").get<double>(), 1e-8);
  EXPECT_EQ(lines(slurp(csv)).front(), "cycle,phase,t,x,y");

  const CliRun b = run(cfg + "find-periodic --word \"00|10\"");
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(Json::parse(b.out).at("orbit").at("period").get<int>(), 2);

  const CliRun c = run(cfg + "find-periodic --word 30");
  EXPECT_EQ(c.code, 2);
  EXPECT_EQ(lines(c.err).size(), 1u);
}

TEST_F(CliTest, PlotData) {
  const CliRun r = run("--config \"" + source("configs/ref.json").string() + "\" plot-data --n 16");
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_EQ(j.at("annulusP").at("inner").size(), 16u);
  EXPECT_EQ(j.at("annulusQ").at("outer").size(), 16u);
  EXPECT_TRUE(j.at("linked").get<bool>());

  Json u = ref_json();
  u["levels"] = {{"ell1", 2.05}, {"ell2", 6.0}, {"h1", 2.0205}, {"h2", 2.03}};
  const CliRun un = run("--config \"" + write_config(u).string() + "\" plot-data");
  ASSERT_EQ(un.code, 0) << un.err;
  const Json ju = Json::parse(un.out);
  EXPECT_FALSE(ju.at("linked").get<bool>());
  EXPECT_EQ(ju.at("annulusP").at("inner").size(), 256u);
  EXPECT_TRUE(ju.at("rect1").empty());

  EXPECT_EQ(run("--config \"" + source("configs/ref.json").string() + "\" plot-data --n 8").code, 2);
}

TEST_F(CliTest, OrbitExport) {
  Json j = ref_json();
  j["r0"] = 5;
  j["rmu"] = 3;
  const CliRun r = run("--config \"" + write_config(j).string() + "\" orbit --x 1.5 --y 0.8 --cycles 2");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(r.out);
  ASSERT_GT(rows.size(), 4u);
  EXPECT_EQ(rows[0], "cycle,phase,t,x,y");
  EXPECT_EQ(rows.back().rfind("1,mu,", 0), 0u) << rows.back();
  const std::string& last = rows.back();
  const double t = std::stod(last.substr(5, last.find(',', 5) - 5));
  EXPECT_NEAR(t, 16.0, 1e-12);
  EXPECT_EQ(run("--config \"" + write_config(j).string() + "\" orbit --x -1 --y 0.8").code, 2);
}
