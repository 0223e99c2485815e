#include "snapshot.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "nets.hpp"

namespace gmnmlab {

using nlohmann::json;

namespace {

json tensor_to_json(const Tensor& t) {
  json j;
  j["shape"] = t.shape();
  std::vector<std::string> data;
  data.reserve(t.size());
  char buf[48];
  for (double v : t.span()) {
    std::snprintf(buf, sizeof(buf), "%a", v);
    data.emplace_back(buf);
  }
  j["data"] = std::move(data);
  return j;
}

Tensor tensor_from_json(const json& j) {
  std::vector<std::size_t> shape = j.at("shape").get<std::vector<std::size_t>>();
  std::vector<double> data;
  for (const auto& s : j.at("data")) {
    const std::string str = s.get<std::string>();
    char* end = nullptr;
    data.push_back(std::strtod(str.c_str(), &end));
    if (end == str.c_str()) throw DataError("snapshot: bad float literal");
  }
  return Tensor(std::move(shape), std::move(data));
}

std::string mode_str(GmnmMode m) {
  return m == GmnmMode::ridge ? "ridge" : "quadratic";
}
GmnmMode mode_from(const std::string& s) {
  if (s == "ridge") return GmnmMode::ridge;
  if (s == "quadratic") return GmnmMode::quadratic;
  throw DataError("snapshot: unknown gmnm mode " + s);
}

json gmnm_cfg_to_json(const GmnmConfig& c) {
  json j;
  j["d"] = c.d;
  j["m"] = c.m;
  j["n"] = c.n;
  j["out_dim"] = c.out_dim;
  j["mode"] = mode_str(c.mode);
  j["minimal"] = c.minimal;
  j["trainable_mu"] = c.trainable_mu;
  j["mu_init"] =
      c.mu_init == MuInit::data_sample ? "data_sample" : "uniform_domain";
  json dom = json::array();
  for (const auto& r : c.domain) dom.push_back({r[0], r[1]});
  j["domain"] = std::move(dom);
  return j;
}

GmnmConfig gmnm_cfg_from_json(const json& j) {
  GmnmConfig c;
  c.d = j.at("d").get<int>();
  c.m = j.at("m").get<int>();
  c.n = j.at("n").get<int>();
  c.out_dim = j.at("out_dim").get<int>();
  c.mode = mode_from(j.at("mode").get<std::string>());
  c.minimal = j.at("minimal").get<bool>();
  c.trainable_mu = j.at("trainable_mu").get<bool>();
  c.mu_init = j.at("mu_init").get<std::string>() == "data_sample"
                  ? MuInit::data_sample
                  : MuInit::uniform_domain;
  for (const auto& r : j.at("domain"))
    c.domain.push_back({r[0].get<double>(), r[1].get<double>()});
  return c;
}

json config_json(Model& model) {
  if (auto* g = dynamic_cast<GmnmModel*>(&model))
    return gmnm_cfg_to_json(g->params().cfg);
  if (auto* m = dynamic_cast<MlpModel*>(&model)) {
    json j;
    j["widths"] = m->config().widths;
    j["act"] = act_to_string(m->config().act);
    return j;
  }
  if (auto* r = dynamic_cast<RbfModel*>(&model)) {
    json j;
    j["d"] = r->config().d;
    j["m"] = r->config().m;
    j["out_dim"] = r->config().out_dim;
    return j;
  }
  if (auto* c = dynamic_cast<ConvModel*>(&model)) {
    const ConvConfig& cc = c->config();
    json j;
    j["h"] = cc.h;
    j["w"] = cc.w;
    j["cin"] = cc.cin;
    j["c1"] = cc.c1;
    j["c2"] = cc.c2;
    j["classes"] = cc.classes;
    j["head"] = cc.head == ConvHead::gmnm ? "gmnm" : "dense";
    j["gmnm_m"] = cc.gmnm_m;
    j["gmnm_n"] = cc.gmnm_n;
    j["gmnm_mode"] = mode_str(cc.gmnm_mode);
    return j;
  }
  if (auto* l = dynamic_cast<LstmModel*>(&model)) {
    const LstmConfig& lc = l->config();
    json j;
    j["features"] = lc.features;
    j["window"] = lc.window;
    j["units"] = lc.units;
    j["gmnm_head"] = lc.gmnm_head;
    j["gmnm_m"] = lc.gmnm_m;
    j["gmnm_out"] = lc.gmnm_out;
    j["gmnm_mode"] = mode_str(lc.gmnm_mode);
    return j;
  }
  throw Error("snapshot: unsupported model kind " + model.kind());
}

std::unique_ptr<Model> construct(const std::string& kind, const json& cfg) {
  Rng rng(0);  // placeholder init; tensors are overwritten right after
  if (kind == "gmnm") {
    GmnmConfig c = gmnm_cfg_from_json(cfg);
    GmnmConfig init_cfg = c;
    init_cfg.mu_init = MuInit::uniform_domain;  // avoid needing data here
    auto model = std::make_unique<GmnmModel>(init_cfg, rng);
    model->params().cfg = c;
    return model;
  }
  if (kind == "mlp") {
    MlpConfig c;
    c.widths = cfg.at("widths").get<std::vector<int>>();
    c.act = act_from_string(cfg.at("act").get<std::string>());
    return std::make_unique<MlpModel>(c, rng);
  }
  if (kind == "rbf") {
    RbfConfig c;
    c.d = cfg.at("d").get<int>();
    c.m = cfg.at("m").get<int>();
    c.out_dim = cfg.at("out_dim").get<int>();
    return std::make_unique<RbfModel>(c, rng);
  }
  if (kind == "conv") {
    ConvConfig c;
    c.h = cfg.at("h").get<int>();
    c.w = cfg.at("w").get<int>();
    c.cin = cfg.at("cin").get<int>();
    c.c1 = cfg.at("c1").get<int>();
    c.c2 = cfg.at("c2").get<int>();
    c.classes = cfg.at("classes").get<int>();
    c.head = cfg.at("head").get<std::string>() == "gmnm" ? ConvHead::gmnm
                                                         : ConvHead::dense;
    c.gmnm_m = cfg.at("gmnm_m").get<int>();
    c.gmnm_n = cfg.at("gmnm_n").get<int>();
    c.gmnm_mode = mode_from(cfg.at("gmnm_mode").get<std::string>());
    return std::make_unique<ConvModel>(c, rng);
  }
  if (kind == "lstm") {
    LstmConfig c;
    c.features = cfg.at("features").get<int>();
    c.window = cfg.at("window").get<int>();
    c.units = cfg.at("units").get<int>();
    c.gmnm_head = cfg.at("gmnm_head").get<bool>();
    c.gmnm_m = cfg.at("gmnm_m").get<int>();
    c.gmnm_out = cfg.at("gmnm_out").get<int>();
    c.gmnm_mode = mode_from(cfg.at("gmnm_mode").get<std::string>());
    return std::make_unique<LstmModel>(c, rng);
  }
  throw DataError("snapshot: unknown model kind " + kind);
}

}  // namespace

std::string snapshot_string(Model& model) {
  json j;
  j["kind"] = model.kind();
  j["config"] = config_json(model);
  json tensors;
  for (const ParamBlock& blk : model.param_blocks())
    tensors[blk.name] = tensor_to_json(*blk.value);
  j["tensors"] = std::move(tensors);
  return j.dump(1);
}

std::unique_ptr<Model> snapshot_from_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("snapshot: bad JSON: ") + e.what());
  }
  try {
    auto model = construct(j.at("kind").get<std::string>(), j.at("config"));
    const json& tensors = j.at("tensors");
    for (const ParamBlock& blk : model->param_blocks()) {
      Tensor t = tensor_from_json(tensors.at(blk.name));
      if (!t.same_shape(*blk.value))
        throw DataError("snapshot: tensor '" + blk.name + "' has wrong shape");
      *blk.value = std::move(t);
    }
    return model;
  } catch (const json::exception& e) {
    throw DataError(std::string("snapshot: missing field: ") + e.what());
  }
}

void snapshot_save(Model& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write snapshot: " + path);
  out << snapshot_string(model) << "\n";
}

std::unique_ptr<Model> snapshot_load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open snapshot: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return snapshot_from_string(ss.str());
}

}  // namespace gmnmlab
