#include "onnx_runtime.hpp"

#include <dlfcn.h>

#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>

#include "slideq/error.hpp"

namespace slideq::detail {

// Slots of the OrtApi function table used here. The table is append-only
// across ONNX Runtime releases, so indices are stable for API version >= 1.
namespace slot {
constexpr int kGetErrorMessage = 2;
constexpr int kCreateEnv = 3;
constexpr int kCreateSession = 7;
constexpr int kRun = 9;
constexpr int kCreateSessionOptions = 10;
constexpr int kSetIntraOpNumThreads = 24;
constexpr int kSessionGetInputName = 36;
constexpr int kSessionGetOutputName = 37;
constexpr int kCreateTensorWithDataAsOrtValue = 49;
constexpr int kGetTensorMutableData = 51;
constexpr int kGetTensorShapeElementCount = 64;
constexpr int kGetTensorTypeAndShape = 65;
constexpr int kCreateCpuMemoryInfo = 69;
constexpr int kAllocatorFree = 76;
constexpr int kGetAllocatorWithDefaultOptions = 78;
constexpr int kReleaseEnv = 92;
constexpr int kReleaseStatus = 93;
constexpr int kReleaseMemoryInfo = 94;
constexpr int kReleaseSession = 95;
constexpr int kReleaseValue = 96;
constexpr int kReleaseTensorTypeAndShapeInfo = 99;
constexpr int kReleaseSessionOptions = 100;
}  // namespace slot

constexpr std::uint32_t kOrtApiVersion = 16;  // ONNX Runtime 1.16+
constexpr int kLoggingLevelWarning = 2;
constexpr int kArenaAllocator = 1;
constexpr int kMemTypeDefault = 0;
constexpr int kTensorFloat = 1;

using Status = void*;

struct OrtApiBase {
  const void* (*GetApi)(std::uint32_t version);
  const char* (*GetVersionString)();
};

struct OrtRuntime {
  void* handle = nullptr;
  void* const* api = nullptr;
  void* env = nullptr;
  void* allocator = nullptr;
  void* cpu_memory = nullptr;

  template <typename Fn>
  Fn fn(int index) const {
    return reinterpret_cast<Fn>(api[index]);
  }

  void check(Status status, const std::string& what) const {
    if (status == nullptr) return;
    const std::string msg =
        fn<const char* (*)(const void*)>(slot::kGetErrorMessage)(status);
    fn<void (*)(void*)>(slot::kReleaseStatus)(status);
    throw Error(ErrorCode::ModelLoadError, what + ": " + msg);
  }
};

namespace {

const OrtRuntime& load_runtime(const std::string& requested) {
  static std::mutex mutex;
  static std::map<std::string, std::unique_ptr<OrtRuntime>> cache;
  std::lock_guard lock(mutex);

  std::vector<std::string> candidates;
  if (!requested.empty()) {
    candidates.push_back(requested);
  } else if (const char* env = std::getenv("SLIDEQ_ONNXRUNTIME_LIB"); env && *env) {
    candidates.emplace_back(env);
  } else {
    candidates = {"libonnxruntime.so.1", "libonnxruntime.so", "libonnxruntime.dylib"};
  }
  const std::string key = candidates.front();
  if (auto it = cache.find(key); it != cache.end()) return *it->second;

  void* handle = nullptr;
  std::string last_error;
  for (const auto& name : candidates) {
    handle = dlopen(name.c_str(), RTLD_NOW | RTLD_LOCAL);
    if (handle) break;
    if (const char* e = dlerror()) last_error = e;
  }
  if (!handle) {
    throw Error(ErrorCode::ModelLoadError, "cannot load ONNX Runtime (" + key + "): " + last_error);
  }
  auto get_base = reinterpret_cast<const OrtApiBase* (*)()>(dlsym(handle, "OrtGetApiBase"));
  if (!get_base) {
    throw Error(ErrorCode::ModelLoadError, "OrtGetApiBase not found in " + key);
  }
  auto rt = std::make_unique<OrtRuntime>();
  rt->handle = handle;
  rt->api = static_cast<void* const*>(get_base()->GetApi(kOrtApiVersion));
  if (!rt->api) {
    throw Error(ErrorCode::ModelLoadError, "ONNX Runtime too old for API version 16");
  }
  rt->check(rt->fn<Status (*)(int, const char*, void**)>(slot::kCreateEnv)(
                kLoggingLevelWarning, "slideq", &rt->env),
            "CreateEnv");
  rt->check(rt->fn<Status (*)(void**)>(slot::kGetAllocatorWithDefaultOptions)(&rt->allocator),
            "GetAllocatorWithDefaultOptions");
  rt->check(rt->fn<Status (*)(int, int, void**)>(slot::kCreateCpuMemoryInfo)(
                kArenaAllocator, kMemTypeDefault, &rt->cpu_memory),
            "CreateCpuMemoryInfo");
  return *cache.emplace(key, std::move(rt)).first->second;
}

std::string io_name(const OrtRuntime& rt, void* session, int which_slot) {
  char* raw = nullptr;
  rt.check(rt.fn<Status (*)(const void*, std::size_t, void*, char**)>(which_slot)(
               session, 0, rt.allocator, &raw),
           "SessionGetName");
  std::string name(raw);
  rt.check(rt.fn<Status (*)(void*, void*)>(slot::kAllocatorFree)(rt.allocator, raw),
           "AllocatorFree");
  return name;
}

// Releases an OrtValue on scope exit.
struct ValueGuard {
  const OrtRuntime& rt;
  void* value = nullptr;
  ~ValueGuard() {
    if (value) rt.fn<void (*)(void*)>(slot::kReleaseValue)(value);
  }
};

}  // namespace

OnnxSession::OnnxSession(const std::filesystem::path& model, std::string input_name,
                         std::string output_name, const std::string& library)
    : input_name_(std::move(input_name)), output_name_(std::move(output_name)) {
  if (!std::filesystem::exists(model)) {
    throw Error(ErrorCode::ModelLoadError, "model file not found: " + model.string());
  }
  rt_ = &load_runtime(library);
  const OrtRuntime& rt = *rt_;
  void* options = nullptr;
  rt.check(rt.fn<Status (*)(void**)>(slot::kCreateSessionOptions)(&options),
           "CreateSessionOptions");
  // Single intra-op thread keeps inference bit-reproducible.
  Status st = rt.fn<Status (*)(void*, int)>(slot::kSetIntraOpNumThreads)(options, 1);
  if (!st) {
    st = rt.fn<Status (*)(const void*, const char*, const void*, void**)>(slot::kCreateSession)(
        rt.env, model.c_str(), options, &session_);
  }
  rt.fn<void (*)(void*)>(slot::kReleaseSessionOptions)(options);
  rt.check(st, "CreateSession(" + model.string() + ")");
  if (input_name_.empty()) input_name_ = io_name(rt, session_, slot::kSessionGetInputName);
  if (output_name_.empty()) output_name_ = io_name(rt, session_, slot::kSessionGetOutputName);
}

OnnxSession::~OnnxSession() {
  if (session_) rt_->fn<void (*)(void*)>(slot::kReleaseSession)(session_);
}

std::vector<float> OnnxSession::run(std::vector<float>& input,
                                    const std::array<std::int64_t, 4>& shape) const {
  const OrtRuntime& rt = *rt_;
  ValueGuard in{rt};
  rt.check(rt.fn<Status (*)(const void*, void*, std::size_t, const std::int64_t*, std::size_t,
                            int, void**)>(slot::kCreateTensorWithDataAsOrtValue)(
               rt.cpu_memory, input.data(), input.size() * sizeof(float), shape.data(),
               shape.size(), kTensorFloat, &in.value),
           "CreateTensor");
  ValueGuard out{rt};
  const char* in_names[] = {input_name_.c_str()};
  const char* out_names[] = {output_name_.c_str()};
  const void* inputs[] = {in.value};
  rt.check(rt.fn<Status (*)(void*, const void*, const char* const*, const void* const*,
                            std::size_t, const char* const*, std::size_t, void**)>(slot::kRun)(
               session_, nullptr, in_names, inputs, 1, out_names, 1, &out.value),
           "Run");
  void* info = nullptr;
  rt.check(rt.fn<Status (*)(const void*, void**)>(slot::kGetTensorTypeAndShape)(out.value, &info),
           "GetTensorTypeAndShape");
  std::size_t count = 0;
  Status st = rt.fn<Status (*)(const void*, std::size_t*)>(slot::kGetTensorShapeElementCount)(
      info, &count);
  rt.fn<void (*)(void*)>(slot::kReleaseTensorTypeAndShapeInfo)(info);
  rt.check(st, "GetTensorShapeElementCount");
  void* data = nullptr;
  rt.check(rt.fn<Status (*)(void*, void**)>(slot::kGetTensorMutableData)(out.value, &data),
           "GetTensorMutableData");
  const auto* f = static_cast<const float*>(data);
  return std::vector<float>(f, f + count);
}

}  // namespace slideq::detail
