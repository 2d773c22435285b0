#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "pon/consensus.hpp"
#include "pon/crypto_chain.hpp"

namespace test {

inline pon::Digest dg(const char* hex) { return pon::Digest::from_hex(hex); }

inline pon::Digest filled(std::uint8_t b) {
  pon::Digest d;
  d.bytes.fill(b);
  return d;
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("pon-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

// Same geometry and radio for every node at every time.
class FixedOracle : public pon::ChannelOracle {
 public:
  FixedOracle(double main_m, double eve_m, pon::RadioParams radio = {})
      : radio_(radio) {
    geo_.main_distance_m = main_m;
    geo_.eve_distance_m = eve_m;
  }
  const pon::ChannelEnv& env() const override { return env_; }
  pon::LinkGeometry geometry(const pon::Digest&, std::uint64_t) const override { return geo_; }
  pon::RadioParams radio(const pon::Digest&, std::uint64_t) const override { return radio_; }
  void set_radio(const pon::RadioParams& r) { radio_ = r; }

 private:
  pon::ChannelEnv env_;
  pon::LinkGeometry geo_;
  pon::RadioParams radio_;
};

}  // namespace test
