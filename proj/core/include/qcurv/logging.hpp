#pragma once

#include <string>

namespace qcurv {

// Reads QCURV_LOG (trace|debug|info|warn|error|off); defaults to warn.
void init_logging_from_env();
void log_info(const std::string& msg);
void log_warn(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace qcurv
