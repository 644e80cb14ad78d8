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

#ifndef TAEMU_DEBUGSTUB_H_
#define TAEMU_DEBUGSTUB_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "taemu/manager.h"

// GDB remote serial protocol subset: ? g G m M Z0 z0 c s qSupported D.
namespace taemu::rsp {

uint8_t Checksum(std::string_view payload);
// "$<payload>#<checksum>"
std::string Frame(std::string_view payload);

// Splits an incoming byte stream into packets.
class PacketDecoder {
 public:
  struct Event {
    enum class Kind { kPacket, kBadChecksum, kAck, kNak, kInterrupt };
    Kind kind;
    std::string payload;
  };

  // Consumes one byte; returns an event when one completes.
  std::optional<Event> Push(char c);

 private:
  enum class State { kIdle, kPayload, kSum1, kSum2 };
  State state_ = State::kIdle;
  std::string payload_;
  char sum_hi_ = 0;
};

// One debug session over an invocation that the manager has already
// positioned with BeginInvoke. The guest starts stopped (S05).
class RspSession {
 public:
  explicit RspSession(TaManager& manager);

  // Feeds bytes received from the debugger and returns the bytes to send.
  std::string Feed(std::string_view bytes);
  // Handles one packet payload and returns the unframed reply.
  std::string Handle(std::string_view payload);

  bool detached() const { return detached_; }
  // Set once the invocation has returned or crashed.
  const std::optional<InvocationResult>& result() const { return result_; }
  // After detach, runs the invocation to completion without breakpoints.
  InvocationResult RunToCompletion();

 private:
  std::string StopReply() const;
  std::string Resume(bool single_step);
  void Finish(const ExecOutcome& outcome);

  TaManager& manager_;
  PacketDecoder decoder_;
  std::string last_reply_;
  std::optional<ExecOutcome> stop_;
  bool at_breakpoint_ = false;
  bool detached_ = false;
  std::optional<InvocationResult> result_;
};

// Accepts one TCP debugger connection and serves it until detach or
// disconnect.
class Server {
 public:
  Server() = default;
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds host:port (0 picks a free port) and returns the bound port.
  uint16_t Listen(uint16_t port, const std::string& host = "127.0.0.1");
  void ServeOne(RspSession& session);

 private:
  int listen_fd_ = -1;
};

}  // namespace taemu::rsp

#endif  // TAEMU_DEBUGSTUB_H_
