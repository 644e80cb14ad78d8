// Copyright 2026 The taemu Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TAEMU_PROTOCOL_H_
#define TAEMU_PROTOCOL_H_

#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "taemu/manager.h"

// Interactive-mode wire protocol (docs/protocol.md). All integers are
// little-endian.
namespace taemu::proto {

inline constexpr uint32_t kMagic = 0x54414D55;  // "UMAT" on the wire

enum class Opcode : uint8_t {
  kOpen = 1,
  kInvoke = 2,
  kClose = 3,
  kResume = 4,
};

// Server -> client notification sent while the TA is paused at a hook.
inline constexpr uint8_t kPauseEvent = 0x81;

enum class SlotKind : uint8_t {
  kNone = 0,
  kValue = 1,         // payload: a u32 | b u32
  kMemref = 2,        // payload: buffer bytes, declared size = len
  kShmPath = 3,       // payload: path of a file to map as shared memory
  kMemrefSized = 4,   // payload: declared size u32 | buffer bytes
};

struct WireSlot {
  SlotKind kind = SlotKind::kNone;
  uint32_t a = 0;
  uint32_t b = 0;
  std::vector<uint8_t> bytes;
  uint32_t declared = 0;
  std::string path;

  friend bool operator==(const WireSlot&, const WireSlot&) = default;
};

struct Request {
  Opcode opcode = Opcode::kInvoke;
  uint32_t session = 0;
  uint32_t cmd_id = 0;
  uint16_t param_types = 0;
  std::array<WireSlot, 4> slots;

  friend bool operator==(const Request&, const Request&) = default;
};

struct Response {
  uint32_t status = 0;
  uint8_t origin = 0;
  std::array<std::vector<uint8_t>, 4> payloads;

  friend bool operator==(const Response&, const Response&) = default;
};

// Upper bound for one slot payload.
inline constexpr uint32_t kMaxPayload = 1u << 20;

std::vector<uint8_t> EncodeRequest(const Request& request);
// Parses one complete request. Throws kProtocolError.
Request DecodeRequest(std::span<const uint8_t> frame);

std::vector<uint8_t> EncodeResponse(const Response& response);
Response DecodeResponse(std::span<const uint8_t> frame);

std::vector<uint8_t> EncodePauseEvent(const std::string& api);

// Status sent for frames that cannot be parsed.
Response ErrorResponse();

// Converts the wire form into manager parameters; shm paths are mapped.
GpParamSet ToParamSet(const Request& request);
Response FromResult(const InvocationResult& result);

// Blocking reader for frames arriving on a stream socket.
class FrameReader {
 public:
  explicit FrameReader(int fd) : fd_(fd) {}
  // Returns the next request, nullopt on orderly disconnect. Throws
  // kProtocolError for malformed frames after discarding pending input.
  std::optional<Request> ReadRequest();
  // Reads either a response or a pause event.
  std::variant<Response, std::string> ReadReply();

 private:
  bool ReadExact(uint8_t* out, size_t n);
  void Drain();
  int fd_;
};

void WriteAll(int fd, std::span<const uint8_t> bytes);

struct ServerOptions {
  // Pause after the pause_nth completed call of pause_api within one
  // invocation and wait for a kResume frame.
  std::string pause_api;
  uint32_t pause_nth = 1;
  // Path of the persistent-object store file, loaded at start and written
  // after every request.
  std::string store_path;
};

// Serves one TA over a Unix stream socket, one client at a time.
class Server {
 public:
  Server(TaManager& manager, ServerOptions options = {});
  ~Server();

  // Creates and binds the socket.
  void Listen(const std::string& socket_path);
  // Accepts clients until Stop() or until max_clients have been served
  // (0 = unlimited).
  void Run(size_t max_clients = 0);
  void Stop();

  // Handles one decoded request. Exposed for tests.
  Response Handle(const Request& request, int client_fd);

 private:
  void ServeClient(int fd);
  void Persist();

  TaManager& manager_;
  ServerOptions options_;
  int listen_fd_ = -1;
  std::string socket_path_;
  std::atomic<bool> stop_{false};
  uint32_t pause_count_ = 0;
  int active_fd_ = -1;
};

class Client {
 public:
  explicit Client(const std::string& socket_path);
  ~Client();
  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;

  // Called when the server pauses at a hook; the client resumes when it
  // returns.
  using PauseCallback = std::function<void(const std::string& api)>;

  Response Send(const Request& request, const PauseCallback& on_pause = {});
  std::optional<uint32_t> Open(const Request& request = {});
  Response Invoke(uint32_t session, uint32_t cmd_id, uint16_t param_types,
                  std::array<WireSlot, 4> slots,
                  const PauseCallback& on_pause = {});
  Response Close(uint32_t session);
  // Sends raw bytes; used to exercise malformed-frame handling.
  void SendRaw(std::span<const uint8_t> bytes);
  Response ReadResponse();

 private:
  int fd_ = -1;
};

}  // namespace taemu::proto

#endif  // TAEMU_PROTOCOL_H_
