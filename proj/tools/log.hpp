#pragma once

#include <chrono>
#include <iostream>
#include <mutex>
#include <string>

#include <json.hpp>

namespace cbench::cli {

// Plain "level: message" lines on stderr, or one JSON object per line with --json.
class Log {
 public:
  void set_json(bool on) { json_ = on; }
  bool json() const { return json_; }

  void info(const std::string& msg, const nlohmann::json& fields = nlohmann::json::object()) { emit("info", msg, fields); }
  void warn(const std::string& msg, const nlohmann::json& fields = nlohmann::json::object()) { emit("warn", msg, fields); }
  void error(const std::string& msg, const nlohmann::json& fields = nlohmann::json::object()) { emit("error", msg, fields); }

 private:
  void emit(const char* level, const std::string& msg, const nlohmann::json& fields) {
    std::lock_guard lock(mutex_);
    if (json_) {
      nlohmann::json j = fields;
      j["level"] = level;
      j["msg"] = msg;
      j["ts_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
      std::cerr << j.dump() << "\n";
    } else {
      std::cerr << level << ": " << msg;
      for (const auto& [k, v] : fields.items()) std::cerr << " " << k << "=" << (v.is_string() ? v.get<std::string>() : v.dump());
      std::cerr << "\n";
    }
  }

  bool json_ = false;
  std::mutex mutex_;
};

}  // namespace cbench::cli
