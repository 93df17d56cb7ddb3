#pragma once

namespace teleop {

/// Keeps large freed blocks in the heap instead of returning them to the OS.
/// Training allocates megabyte-sized temporaries every batch; on kernels where
/// page faults are expensive this roughly halves step time. No-op outside glibc.
void retain_freed_memory();

} // namespace teleop
