//! Allocation accounting for peak-memory measurements.
//!
//! Install [`TrackingAllocator`] as the global allocator of a binary or test
//! target, then wrap the code of interest in [`measure_peak`]. Counters are
//! per thread, so concurrent work on other threads does not pollute a
//! measurement; [`measure_peak_serial`] additionally pins rayon work to a
//! single worker so the whole computation is accounted.

use std::alloc::{GlobalAlloc, Layout, System};
use std::cell::Cell;

pub struct TrackingAllocator;

thread_local! {
    static CURRENT: Cell<isize> = const { Cell::new(0) };
    static PEAK: Cell<isize> = const { Cell::new(0) };
}

#[inline]
fn record(delta: isize) {
    let _ = CURRENT.try_with(|c| {
        let now = c.get() + delta;
        c.set(now);
        let _ = PEAK.try_with(|p| {
            if now > p.get() {
                p.set(now);
            }
        });
    });
}

unsafe impl GlobalAlloc for TrackingAllocator {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc(layout);
        if !p.is_null() {
            record(layout.size() as isize);
        }
        p
    }

    unsafe fn alloc_zeroed(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc_zeroed(layout);
        if !p.is_null() {
            record(layout.size() as isize);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        record(-(layout.size() as isize));
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let p = System.realloc(ptr, layout, new_size);
        if !p.is_null() {
            record(new_size as isize - layout.size() as isize);
        }
        p
    }
}

/// Bytes currently allocated by this thread (net of frees).
pub fn current_bytes() -> isize {
    CURRENT.with(|c| c.get())
}

/// Whether allocations on this thread are being counted.
pub fn is_installed() -> bool {
    let before = current_bytes();
    let probe = std::hint::black_box(vec![0u8; 4096]);
    let during = current_bytes();
    drop(probe);
    during - before >= 4096
}

/// Runs `f` and returns its result with the peak number of bytes allocated
/// above the level at entry, counting only this thread.
pub fn measure_peak<R>(f: impl FnOnce() -> R) -> (R, usize) {
    let base = current_bytes();
    PEAK.with(|p| p.set(base));
    let out = f();
    let peak = PEAK.with(|p| p.get());
    (out, (peak - base).max(0) as usize)
}

/// [`measure_peak`] with any rayon parallelism confined to one worker thread.
pub fn measure_peak_serial<R: Send>(f: impl FnOnce() -> R + Send) -> (R, usize) {
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .expect("single-thread pool");
        pool.install(|| measure_peak(f))
    }
    #[cfg(not(feature = "parallel"))]
    {
        measure_peak(f)
    }
}
