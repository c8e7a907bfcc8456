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

#include "bspf/comm/frame.hpp"

#include "bspf/serialize.hpp"

namespace bspf::comm {

std::string_view opcode_name(Opcode op) {
  switch (op) {
    case Opcode::P2P: return "P2P";
    case Opcode::AllToAll: return "A2A";
    case Opcode::Gather: return "GATHER";
    case Opcode::AllGather: return "ALLGATHER";
    case Opcode::Broadcast: return "BCAST";
    case Opcode::AllReduce: return "ALLREDUCE";
    case Opcode::Barrier: return "BARRIER";
  }
  return "?";
}

void encode_frame_header(const Frame &frame, uint8_t (&out)[kFrameHeaderSize]) {
  Bytes b;
  b.reserve(kFrameHeaderSize);
  wire::put_u32(b, kFrameMagic);
  wire::put_u8(b, static_cast<uint8_t>(frame.opcode));
  wire::put_u32(b, frame.sequence);
  wire::put_u32(b, frame.source);
  wire::put_u32(b, frame.tag);
  wire::put_u64(b, frame.payload.size());
  std::copy(b.begin(), b.end(), out);
}

FrameHeader decode_frame_header(std::span<const uint8_t, kFrameHeaderSize> in) {
  wire::Reader r(in);
  if (r.u32() != kFrameMagic) throw Error(ErrorCode::ProtocolMismatch, "bad frame magic");
  const auto op = r.u8();
  if (op > static_cast<uint8_t>(Opcode::Barrier)) throw Error(ErrorCode::ProtocolMismatch, "unknown opcode");
  FrameHeader h{static_cast<Opcode>(op), 0, 0, 0, 0};
  h.sequence = r.u32();
  h.source = r.u32();
  h.tag = r.u32();
  h.payload_length = r.u64();
  return h;
}

Bytes encode_frame(const Frame &frame) {
  uint8_t header[kFrameHeaderSize];
  encode_frame_header(frame, header);
  Bytes out(header, header + kFrameHeaderSize);
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  return out;
}

Frame decode_frame(std::span<const uint8_t> bytes) {
  if (bytes.size() < kFrameHeaderSize) throw Error(ErrorCode::CorruptPayload, "short frame");
  auto h = decode_frame_header(bytes.first<kFrameHeaderSize>());
  if (bytes.size() - kFrameHeaderSize != h.payload_length) throw Error(ErrorCode::CorruptPayload, "frame length");
  return Frame{h.opcode, h.sequence, h.source, h.tag, Bytes(bytes.begin() + kFrameHeaderSize, bytes.end())};
}

}  // namespace bspf::comm
