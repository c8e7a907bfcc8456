/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef BSPF_COMM_FRAME_HPP
#define BSPF_COMM_FRAME_HPP

#include <cstdint>
#include <span>

#include "bspf/table.hpp"

namespace bspf::comm {

enum class Opcode : uint8_t {
  P2P = 0,
  AllToAll = 1,
  Gather = 2,
  AllGather = 3,
  Broadcast = 4,
  AllReduce = 5,
  Barrier = 6,
};

std::string_view opcode_name(Opcode op);

constexpr uint32_t kFrameMagic = 0x42535046;
constexpr std::size_t kFrameHeaderSize = 4 + 1 + 4 + 4 + 4 + 8;

struct Frame {
  Opcode opcode = Opcode::P2P;
  uint32_t sequence = 0;
  uint32_t source = 0;
  uint32_t tag = 0;
  Bytes payload;
};

/// Header fields of a wire frame, as decoded from kFrameHeaderSize bytes.
struct FrameHeader {
  Opcode opcode;
  uint32_t sequence;
  uint32_t source;
  uint32_t tag;
  uint64_t payload_length;
};

/// u32 magic, u8 opcode, u32 sequence, u32 source, u32 tag, u64 payload length (little-endian).
void encode_frame_header(const Frame &frame, uint8_t (&out)[kFrameHeaderSize]);
/// Throws ProtocolMismatch on bad magic or opcode.
FrameHeader decode_frame_header(std::span<const uint8_t, kFrameHeaderSize> in);

/// Header followed by payload.
Bytes encode_frame(const Frame &frame);
Frame decode_frame(std::span<const uint8_t> bytes);

}  // namespace bspf::comm

#endif  // BSPF_COMM_FRAME_HPP
