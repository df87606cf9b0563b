#include "qcurv/logging.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <mutex>

namespace qcurv {

namespace {

std::shared_ptr<spdlog::logger> logger() {
  static std::once_flag once;
  static std::shared_ptr<spdlog::logger> instance;
  std::call_once(once, [] {
    instance = spdlog::stderr_color_mt("qcurv");
    instance->set_level(spdlog::level::warn);
    instance->set_pattern("[%l] %v");
  });
  return instance;
}

}  // namespace

void init_logging_from_env() {
  const char* env = std::getenv("QCURV_LOG");
  if (!env) return;
  logger()->set_level(spdlog::level::from_str(env));
}

void log_info(const std::string& msg) { logger()->info(msg); }
void log_warn(const std::string& msg) { logger()->warn(msg); }
void log_debug(const std::string& msg) { logger()->debug(msg); }

}  // namespace qcurv
