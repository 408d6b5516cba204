#include "advblur/advblur.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <sstream>
#include <string>

#include "acceptance.hpp"
#include "checkpoint.hpp"
#include "errors.hpp"
#include "experiment.hpp"
#include "train.hpp"

struct advblur_config {
  advblur::ExperimentConfig cfg;
};

struct advblur_detector {
  advblur::Detector detector;
};

namespace {

thread_local std::string g_last_error;

advblur_status status_of(advblur::ErrorKind k) {
  using advblur::ErrorKind;
  switch (k) {
    case ErrorKind::numeric:
    case ErrorKind::io: return ADVBLUR_ERR_RUNTIME;
    default: return ADVBLUR_ERR_VALIDATION;
  }
}

template <class F>
advblur_status guarded(F&& f) {
  g_last_error.clear();
  try {
    return f();
  } catch (const advblur::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return ADVBLUR_ERR_RUNTIME;
}

void need(const void* p, const char* what) {
  advblur::require(p != nullptr, advblur::ErrorKind::validation, std::string(what) + " must not be NULL");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

/// Forwards complete lines to a callback.
class LineBuf : public std::streambuf {
 public:
  LineBuf(advblur_log_fn fn, void* user) : fn_(fn), user_(user) {}
  ~LineBuf() override {
    if (!line_.empty()) emit();
  }

 protected:
  int overflow(int c) override {
    if (c == traits_type::eof()) return traits_type::not_eof(c);
    if (c == '\n')
      emit();
    else
      line_.push_back(char(c));
    return c;
  }

 private:
  void emit() {
    if (fn_) fn_(line_.c_str(), user_);
    line_.clear();
  }
  advblur_log_fn fn_;
  void* user_;
  std::string line_;
};

struct LogStream {
  LineBuf buf;
  std::ostream os;
  LogStream(advblur_log_fn fn, void* user) : buf(fn, user), os(&buf) {}
};

std::vector<std::string> strings(const char* const* v, std::size_t n) {
  std::vector<std::string> out;
  if (n > 0) need(v, "string array");
  for (std::size_t i = 0; i < n; ++i) {
    need(v[i], "string array entry");
    out.emplace_back(v[i]);
  }
  return out;
}

void set_dir(char** dir_out, const std::filesystem::path& p) {
  if (dir_out) *dir_out = dup(p.string());
}

}  // namespace

extern "C" {

const char* advblur_version(void) { return "1.0.0"; }
const char* advblur_last_error(void) { return g_last_error.c_str(); }
void advblur_string_free(char* s) { std::free(s); }

advblur_status advblur_config_default(advblur_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new advblur_config{};
    return ADVBLUR_OK;
  });
}

advblur_status advblur_config_load(const char* path, advblur_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new advblur_config{advblur::ExperimentConfig::load(path)};
    return ADVBLUR_OK;
  });
}

advblur_status advblur_config_parse(const char* json_text, advblur_config** out) {
  return guarded([&] {
    need(json_text, "json_text");
    need(out, "out");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
      advblur::fail(advblur::ErrorKind::config, std::string("config is not valid JSON: ") + e.what());
    }
    *out = new advblur_config{advblur::ExperimentConfig::from_json(j)};
    return ADVBLUR_OK;
  });
}

advblur_status advblur_config_apply(advblur_config* cfg, const advblur_overrides* o) {
  return guarded([&] {
    need(cfg, "cfg");
    advblur::Overrides ov;
    if (o) {
      if (o->has_seed) ov.seed = o->seed;
      if (o->out) ov.out = o->out;
      if (o->regime) ov.regime = o->regime;
    }
    cfg->cfg = advblur::apply_overrides(cfg->cfg, ov, std::getenv(advblur::kSeedEnv));
    return ADVBLUR_OK;
  });
}

advblur_status advblur_config_seed(const advblur_config* cfg, uint64_t* seed) {
  return guarded([&] {
    need(cfg, "cfg");
    need(seed, "seed");
    *seed = cfg->cfg.seed;
    return ADVBLUR_OK;
  });
}

advblur_status advblur_config_to_json(const advblur_config* cfg, char** json_out) {
  return guarded([&] {
    need(cfg, "cfg");
    need(json_out, "json_out");
    *json_out = dup(cfg->cfg.to_json().dump(2));
    return ADVBLUR_OK;
  });
}

void advblur_config_free(advblur_config* cfg) { delete cfg; }

advblur_status advblur_synth(const advblur_config* cfg, advblur_log_fn log, void* user) {
  return guarded([&] {
    need(cfg, "cfg");
    LogStream ls(log, user);
    advblur::cmd_synth(cfg->cfg, ls.os);
    return ADVBLUR_OK;
  });
}

advblur_status advblur_train(const advblur_config* cfg, advblur_log_fn log, void* user, char** dir_out) {
  return guarded([&] {
    need(cfg, "cfg");
    LogStream ls(log, user);
    set_dir(dir_out, advblur::cmd_train(cfg->cfg, ls.os));
    return ADVBLUR_OK;
  });
}

advblur_status advblur_attack(const advblur_config* cfg, const char* const* checkpoints, size_t n, advblur_log_fn log,
                              void* user, char** dir_out) {
  return guarded([&] {
    need(cfg, "cfg");
    LogStream ls(log, user);
    set_dir(dir_out, advblur::cmd_attack(cfg->cfg, strings(checkpoints, n), ls.os));
    return ADVBLUR_OK;
  });
}

advblur_status advblur_eval(const advblur_config* cfg, const char* const* checkpoints, size_t n, advblur_log_fn log,
                            void* user, char** dir_out) {
  return guarded([&] {
    need(cfg, "cfg");
    LogStream ls(log, user);
    set_dir(dir_out, advblur::cmd_eval(cfg->cfg, strings(checkpoints, n), ls.os));
    return ADVBLUR_OK;
  });
}

advblur_status advblur_grad_check(const advblur_config* cfg, advblur_log_fn log, void* user, char** dir_out) {
  return guarded([&] {
    need(cfg, "cfg");
    LogStream ls(log, user);
    set_dir(dir_out, advblur::cmd_grad_check(cfg->cfg, ls.os));
    return ADVBLUR_OK;
  });
}

advblur_status advblur_reproduce(const advblur_config* cfg, const char* const* only, size_t n_only,
                                 advblur_log_fn progress, advblur_log_fn results, void* user) {
  return guarded([&] {
    need(cfg, "cfg");
    LogStream p(progress, user), r(results, user);
    advblur::AcceptanceOptions opt;
    opt.only = strings(only, n_only);
    opt.progress = &p.os;
    opt.results = &r.os;
    const advblur::AcceptanceSummary s = advblur::run_acceptance(cfg->cfg, opt);
    p.os << "summary " << (s.dir / "acceptance.json").string() << "\n";
    return s.pass() ? ADVBLUR_OK : ADVBLUR_ERR_ACCEPTANCE;
  });
}

advblur_status advblur_detector_load(const char* checkpoint, advblur_detector** out) {
  return guarded([&] {
    need(checkpoint, "checkpoint");
    need(out, "out");
    const advblur::Checkpoint ck = advblur::load_checkpoint(advblur::resolve_detector_checkpoint(checkpoint));
    *out = new advblur_detector{advblur::detector_from_checkpoint(ck)};
    return ADVBLUR_OK;
  });
}

advblur_status advblur_detector_score(const advblur_detector* d, const double* image, int channels, int height,
                                      int width, double* fake_probability) {
  return guarded([&] {
    need(d, "detector");
    need(image, "image");
    need(fake_probability, "fake_probability");
    const auto& a = d->detector.arch();
    advblur::require(channels == a.channels && height == a.height && width == a.width, advblur::ErrorKind::shape,
                     "image shape does not match the detector input");
    advblur::Image x(channels, height, width);
    std::copy(image, image + x.size(), x.data.begin());
    *fake_probability = advblur::fake_probability(d->detector.logits(x));
    return ADVBLUR_OK;
  });
}

void advblur_detector_free(advblur_detector* d) { delete d; }

advblur_status advblur_blur_apply(const double* image, int channels, int height, int width, const double* sigma,
                                  int kernel, const char* boundary, int normalize, double* out) {
  return guarded([&] {
    need(image, "image");
    need(sigma, "sigma");
    need(out, "out");
    advblur::require(channels > 0 && height > 0 && width > 0, advblur::ErrorKind::shape, "image dimensions must be positive");
    advblur::Image x(channels, height, width);
    std::copy(image, image + x.size(), x.data.begin());
    advblur::SigmaMap s{advblur::Tensor(1, height, width)};
    std::copy(sigma, sigma + s.sigma.size(), s.sigma.data.begin());
    advblur::BlurSpec spec;
    spec.k = kernel;
    spec.boundary = advblur::boundary_from_string(boundary ? boundary : "reflect");
    spec.normalize = normalize != 0;
    const advblur::Image y = advblur::blur_apply(x, s, spec);
    std::copy(y.data.begin(), y.data.end(), out);
    return ADVBLUR_OK;
  });
}

advblur_status advblur_auc(const double* scores, const int* labels, size_t n, double* out) {
  return guarded([&] {
    need(out, "out");
    if (n > 0) {
      need(scores, "scores");
      need(labels, "labels");
    }
    *out = advblur::auc({scores, n}, {labels, n});
    return ADVBLUR_OK;
  });
}

}  // extern "C"
