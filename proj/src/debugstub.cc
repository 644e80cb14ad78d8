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

#include "taemu/debugstub.h"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <vector>

#include <fmt/format.h>

#include "taemu/bytes.h"
#include "taemu/error.h"
#include "taemu/isa.h"

namespace taemu::rsp {

namespace {

int HexValue(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::optional<uint32_t> ParseHex32(std::string_view s) {
  if (s.empty() || s.size() > 8) return std::nullopt;
  uint32_t v = 0;
  for (char c : s) {
    int d = HexValue(c);
    if (d < 0) return std::nullopt;
    v = (v << 4) | static_cast<uint32_t>(d);
  }
  return v;
}

std::string LeHex32(uint32_t v) {
  uint8_t b[4];
  StoreLe32(b, v);
  return HexEncode(b);
}

constexpr uint32_t kMaxTransfer = 0x4000;

}  // namespace

uint8_t Checksum(std::string_view payload) {
  uint8_t sum = 0;
  for (char c : payload) sum = static_cast<uint8_t>(sum + static_cast<uint8_t>(c));
  return sum;
}

std::string Frame(std::string_view payload) {
  return fmt::format("${}#{:02x}", payload, Checksum(payload));
}

std::optional<PacketDecoder::Event> PacketDecoder::Push(char c) {
  switch (state_) {
    case State::kIdle:
      if (c == '$') {
        payload_.clear();
        state_ = State::kPayload;
      } else if (c == '+') {
        return Event{Event::Kind::kAck, {}};
      } else if (c == '-') {
        return Event{Event::Kind::kNak, {}};
      } else if (c == '\x03') {
        return Event{Event::Kind::kInterrupt, {}};
      }
      return std::nullopt;
    case State::kPayload:
      if (c == '#') {
        state_ = State::kSum1;
      } else {
        payload_.push_back(c);
      }
      return std::nullopt;
    case State::kSum1:
      sum_hi_ = c;
      state_ = State::kSum2;
      return std::nullopt;
    case State::kSum2: {
      state_ = State::kIdle;
      int hi = HexValue(sum_hi_);
      int lo = HexValue(c);
      if (hi < 0 || lo < 0 || Checksum(payload_) != ((hi << 4) | lo)) {
        return Event{Event::Kind::kBadChecksum, {}};
      }
      return Event{Event::Kind::kPacket, std::move(payload_)};
    }
  }
  return std::nullopt;
}

RspSession::RspSession(TaManager& manager) : manager_(manager) {}

std::string RspSession::Feed(std::string_view bytes) {
  std::string out;
  for (char c : bytes) {
    auto ev = decoder_.Push(c);
    if (!ev) continue;
    switch (ev->kind) {
      case PacketDecoder::Event::Kind::kPacket:
        out += '+';
        last_reply_ = Frame(Handle(ev->payload));
        out += last_reply_;
        break;
      case PacketDecoder::Event::Kind::kBadChecksum:
        out += '-';
        break;
      case PacketDecoder::Event::Kind::kNak:
        out += last_reply_;
        break;
      default:
        break;
    }
  }
  return out;
}

std::string RspSession::StopReply() const {
  if (!stop_) return "S05";
  switch (stop_->kind) {
    case OutcomeKind::kReturned:
      return fmt::format("W{:02x}", result_ ? result_->return_code & 0xFF : 0);
    case OutcomeKind::kCrash:
      return "S0B";
    case OutcomeKind::kBudgetExhausted:
      return "S18";
    case OutcomeKind::kBreakpoint:
      return "S05";
  }
  return "S05";
}

void RspSession::Finish(const ExecOutcome& outcome) {
  stop_ = outcome;
  result_ = manager_.FinishInvoke(outcome);
}

std::string RspSession::Resume(bool single_step) {
  if (result_) return StopReply();
  if (single_step) {
    auto o = Step(manager_.guest(), manager_.hooks(), true);
    if (o && o->kind != OutcomeKind::kBreakpoint) {
      Finish(*o);
    } else {
      stop_ = ExecOutcome::Breakpoint(manager_.guest().pc());
      at_breakpoint_ = true;
    }
    return StopReply();
  }
  ExecOutcome o = manager_.Resume(at_breakpoint_);
  if (o.kind == OutcomeKind::kBreakpoint) {
    stop_ = o;
    at_breakpoint_ = true;
  } else {
    Finish(o);
  }
  return StopReply();
}

InvocationResult RspSession::RunToCompletion() {
  if (!result_) {
    manager_.hooks().breakpoints.clear();
    Finish(manager_.Resume(true));
  }
  return *result_;
}

std::string RspSession::Handle(std::string_view p) {
  GuestState& g = manager_.guest();
  if (p.empty()) return "";
  switch (p[0]) {
    case '?':
      return StopReply();
    case 'g': {
      std::string out;
      for (uint32_t r : g.regs) out += LeHex32(r);
      return out;
    }
    case 'G': {
      auto bytes = HexDecode(p.substr(1));
      if (!bytes || bytes->size() != 4 * isa::kNumRegs) return "E01";
      for (int i = 0; i < isa::kNumRegs; ++i) g.regs[i] = LoadLe32(bytes->data() + 4 * i);
      at_breakpoint_ = false;
      return "OK";
    }
    case 'm': {
      auto comma = p.find(',');
      if (comma == std::string_view::npos) return "E01";
      auto addr = ParseHex32(p.substr(1, comma - 1));
      auto len = ParseHex32(p.substr(comma + 1));
      if (!addr || !len || *len > kMaxTransfer) return "E01";
      std::vector<uint8_t> buf(*len);
      if (!g.memory.Peek(*addr, buf)) return "E01";
      return HexEncode(buf);
    }
    case 'M': {
      auto comma = p.find(',');
      auto colon = p.find(':');
      if (comma == std::string_view::npos || colon == std::string_view::npos ||
          colon < comma) {
        return "E01";
      }
      auto addr = ParseHex32(p.substr(1, comma - 1));
      auto len = ParseHex32(p.substr(comma + 1, colon - comma - 1));
      auto bytes = HexDecode(p.substr(colon + 1));
      if (!addr || !len || !bytes || bytes->size() != *len) return "E01";
      if (!g.memory.Poke(*addr, *bytes)) return "E01";
      return "OK";
    }
    case 'Z':
    case 'z': {
      if (p.size() < 3 || p[1] != '0' || p[2] != ',') return "";
      auto rest = p.substr(3);
      auto comma = rest.find(',');
      auto addr = ParseHex32(rest.substr(0, comma));
      if (!addr) return "E01";
      try {
        if (p[0] == 'Z') {
          manager_.hooks().AddBreakpoint(*addr);
        } else {
          manager_.hooks().RemoveBreakpoint(*addr);
        }
      } catch (const Error&) {
        return "E01";
      }
      return "OK";
    }
    case 'c':
      return Resume(false);
    case 's':
      return Resume(true);
    case 'D':
      detached_ = true;
      return "OK";
    case 'H':
      return "OK";
    case 'q':
      if (p.starts_with("qSupported")) return fmt::format("PacketSize={:x}", kMaxTransfer);
      if (p == "qAttached") return "1";
      return "";
    default:
      return "";
  }
}

Server::~Server() {
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

uint16_t Server::Listen(uint16_t port, const std::string& host) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error(ErrorCode::kIoError, "socket failed");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    throw Error(ErrorCode::kIoError, "bad listen address " + host);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(listen_fd_, 1) != 0) {
    throw Error(ErrorCode::kIoError,
                fmt::format("cannot listen on {}:{}: {}", host, port, std::strerror(errno)));
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  return ntohs(addr.sin_port);
}

void Server::ServeOne(RspSession& session) {
  int fd = ::accept(listen_fd_, nullptr, nullptr);
  if (fd < 0) throw Error(ErrorCode::kIoError, "accept failed");
  char buf[4096];
  while (!session.detached()) {
    ssize_t n = ::recv(fd, buf, sizeof(buf), 0);
    if (n <= 0) break;
    std::string out = session.Feed({buf, static_cast<size_t>(n)});
    size_t sent = 0;
    while (sent < out.size()) {
      ssize_t w = ::send(fd, out.data() + sent, out.size() - sent, MSG_NOSIGNAL);
      if (w <= 0) break;
      sent += static_cast<size_t>(w);
    }
  }
  ::close(fd);
}

}  // namespace taemu::rsp
