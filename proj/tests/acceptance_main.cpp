// Acceptance suite driver: synthesizes the default dataset under the build tree, then runs every
// criterion through the public C API and prints one PASS/FAIL line per criterion.
#include <cstdio>
#include <string>
#include <vector>

#include "advblur/advblur.h"

namespace {

void progress(const char* line, void*) {
  std::fprintf(stderr, "%s\n", line);
  std::fflush(stderr);
}

void result(const char* line, void*) {
  std::fprintf(stdout, "%s\n", line);
  std::fflush(stdout);
}

int fail(advblur_status s, const char* what) {
  std::fprintf(stderr, "%s failed: %s\n", what, advblur_last_error());
  return s == ADVBLUR_OK ? 2 : int(s);
}

}  // namespace

int main(int argc, char** argv) {
  // Usage: advblur_acceptance <work-dir> [criterion ...]
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <work-dir> [criterion ...]\n", argv[0]);
    return 1;
  }
  const std::string work = argv[1];
  std::vector<const char*> only(argv + 2, argv + argc);

  const std::string json = "{\"data\": {\"root\": \"" + work + "/data\"}, \"out\": \"" + work + "/runs\"}";
  advblur_config* cfg = nullptr;
  advblur_status s = advblur_config_parse(json.c_str(), &cfg);
  if (s != ADVBLUR_OK) return fail(s, "config");
  s = advblur_config_apply(cfg, nullptr);
  if (s != ADVBLUR_OK) return fail(s, "config");
  s = advblur_synth(cfg, progress, nullptr);
  if (s != ADVBLUR_OK) return fail(s, "synth");
  s = advblur_reproduce(cfg, only.data(), only.size(), progress, result, nullptr);
  advblur_config_free(cfg);
  if (s == ADVBLUR_ERR_ACCEPTANCE) {
    std::fprintf(stdout, "acceptance: FAIL\n");
    return 3;
  }
  if (s != ADVBLUR_OK) return fail(s, "reproduce");
  std::fprintf(stdout, "acceptance: PASS\n");
  return 0;
}
