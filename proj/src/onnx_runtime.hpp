#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace slideq::detail {

struct OrtRuntime;

/// Minimal ONNX Runtime session bound through the C API, loaded with dlopen
/// so the engine builds without ONNX Runtime headers.
class OnnxSession {
 public:
  OnnxSession(const std::filesystem::path& model, std::string input_name,
              std::string output_name, const std::string& library);
  ~OnnxSession();
  OnnxSession(const OnnxSession&) = delete;
  OnnxSession& operator=(const OnnxSession&) = delete;

  /// Runs one float32 input tensor and returns the flattened float output.
  std::vector<float> run(std::vector<float>& input, const std::array<std::int64_t, 4>& shape) const;

 private:
  const OrtRuntime* rt_ = nullptr;
  void* session_ = nullptr;
  std::string input_name_;
  std::string output_name_;
};

}  // namespace slideq::detail
