use std::fmt;
use std::str::FromStr;

use crate::Scalar;

use super::FitError;

/// Average per-instruction latency: `T_tot / (2 * 256 * N)`.
///
/// The latency kernel issues two dependent instructions, unrolled 256 times,
/// and accumulates the elapsed cycles of `N` runs into `T_tot`.
pub fn avg_latency_from_timing<T: Scalar>(t_tot: T, n: u64) -> Result<T, FitError> {
    if n == 0 {
        return Err(FitError::Precondition("repetition count must be >= 1".into()));
    }
    if !(t_tot >= T::zero()) {
        return Err(FitError::Precondition(format!("T_tot must be >= 0, got {t_tot}")));
    }
    Ok(t_tot / (T::from_count(2 * 256) * T::from_count(n)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MicrobenchKind {
    /// Throughput of `adds` with 1, 2 or 3 independent dependency chains.
    ComputeThroughput { ilp: u8 },
    /// Single-thread latency of a dependent compute pair.
    Latency,
    PointerChaseGlobal,
    PointerChaseShared,
    EmptyLaunch,
}

impl MicrobenchKind {
    /// Every kind, with all supported ILP levels.
    pub const ALL: [MicrobenchKind; 7] = [
        MicrobenchKind::ComputeThroughput { ilp: 1 },
        MicrobenchKind::ComputeThroughput { ilp: 2 },
        MicrobenchKind::ComputeThroughput { ilp: 3 },
        MicrobenchKind::Latency,
        MicrobenchKind::PointerChaseGlobal,
        MicrobenchKind::PointerChaseShared,
        MicrobenchKind::EmptyLaunch,
    ];

    pub fn file_name(&self) -> String {
        match self {
            MicrobenchKind::ComputeThroughput { ilp } => format!("compute_throughput_ilp{ilp}.cu"),
            other => format!("{other}.cu"),
        }
    }
}

impl fmt::Display for MicrobenchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MicrobenchKind::ComputeThroughput { ilp } => write!(f, "compute_throughput:{ilp}"),
            MicrobenchKind::Latency => f.write_str("latency"),
            MicrobenchKind::PointerChaseGlobal => f.write_str("pointer_chase_global"),
            MicrobenchKind::PointerChaseShared => f.write_str("pointer_chase_shared"),
            MicrobenchKind::EmptyLaunch => f.write_str("empty_launch"),
        }
    }
}

/// Accepts `compute_throughput:N`, `compute_throughput(N)` or one of the
/// plain kind names. A bare `compute_throughput` means ILP 1.
impl FromStr for MicrobenchKind {
    type Err = FitError;

    fn from_str(s: &str) -> Result<Self, FitError> {
        let s = s.trim();
        let unknown = || FitError::UnknownKind(s.to_string());
        if let Some(rest) = s.strip_prefix("compute_throughput") {
            let arg = rest
                .strip_prefix(':')
                .or_else(|| rest.strip_prefix('(').and_then(|r| r.strip_suffix(')')))
                .unwrap_or(rest);
            if arg.is_empty() {
                return Ok(MicrobenchKind::ComputeThroughput { ilp: 1 });
            }
            let ilp = arg.trim().parse().map_err(|_| unknown())?;
            return Ok(MicrobenchKind::ComputeThroughput { ilp });
        }
        match s {
            "latency" => Ok(MicrobenchKind::Latency),
            "pointer_chase_global" => Ok(MicrobenchKind::PointerChaseGlobal),
            "pointer_chase_shared" => Ok(MicrobenchKind::PointerChaseShared),
            "empty_launch" => Ok(MicrobenchKind::EmptyLaunch),
            _ => Err(unknown()),
        }
    }
}

const PRELUDE: &str = r#"#include <cstdio>
#include <cuda_runtime.h>

#define repeat2(S) S S
#define repeat4(S) repeat2(S) repeat2(S)
#define repeat8(S) repeat4(S) repeat4(S)
#define repeat16(S) repeat8(S) repeat8(S)
#define repeat32(S) repeat16(S) repeat16(S)
#define repeat64(S) repeat32(S) repeat32(S)
#define repeat128(S) repeat64(S) repeat64(S)
#define repeat256(S) repeat128(S) repeat128(S)

"#;

/// CUDA source for one microbenchmark. Output depends only on `kind`.
pub fn generate_microbench(kind: MicrobenchKind) -> Result<String, FitError> {
    let body = match kind {
        MicrobenchKind::ComputeThroughput { ilp } => throughput(ilp)?,
        MicrobenchKind::Latency => LATENCY.to_string(),
        MicrobenchKind::PointerChaseGlobal => GLOBAL_CHASE.to_string(),
        MicrobenchKind::PointerChaseShared => SHARED_CHASE.to_string(),
        MicrobenchKind::EmptyLaunch => EMPTY.to_string(),
    };
    Ok(format!("// microbenchmark: {kind}\n{PRELUDE}{body}"))
}

fn throughput(ilp: u8) -> Result<String, FitError> {
    let (decl, chain, sum) = match ilp {
        1 => ("int a = threadIdx.x, b = 1;", "b+=a; a+=b;", "b+a"),
        2 => (
            "int a = threadIdx.x, b = 1, c = 2, d = 3;",
            "b+=a; a+=b; c+=d; d+=c;",
            "b+a+c+d",
        ),
        3 => (
            "int a = threadIdx.x, b = 1, c = 2, d = 3, e = 4, f = 5;",
            "b+=a; a+=b; c+=d; d+=c; e+=f; f+=e;",
            "b+a+c+d+e+f",
        ),
        other => {
            return Err(FitError::Precondition(format!(
                "ILP must be 1, 2 or 3, got {other}"
            )))
        }
    };
    Ok(format!(
        r#"#define ILP {ilp}
const int innerLoopIter = 64;

__global__ void throughput_kernel(int *dummy, long long *cycles) {{
    {decl}
    int j = blockIdx.x*blockDim.x + threadIdx.x + blockDim.x*threadIdx.y;
    long long start = clock64();
    for (int i = 0; i < innerLoopIter; i++) {{
        repeat256({chain});
    }}
    long long stop = clock64();
    dummy[j]= {sum}; //store results to avoid compiler optimization
    if (threadIdx.x == 0) cycles[blockIdx.x] = stop - start;
}}

// Ops per cycle for `warps` active warps of one block.
double throughput_func(dim3 Db, dim3 Dg, int *d_dummy, long long *d_cycles) {{
    cudaEvent_t start, stop;
    cudaEventCreate(&start);
    cudaEventCreate(&stop);
    cudaEventRecord(start, 0);
    throughput_kernel<<<Dg, Db>>>(d_dummy, d_cycles);
    cudaEventRecord(stop, 0);
    cudaEventSynchronize(stop);
    float elapsedTime = 0.0f;
    cudaEventElapsedTime(&elapsedTime, start, stop);
    long long cycles = 0;
    cudaMemcpy(&cycles, d_cycles, sizeof(long long), cudaMemcpyDeviceToHost);
    double ops = 2.0 * ILP * 256.0 * innerLoopIter * Db.x * Db.y * Dg.x;
    cudaEventDestroy(start);
    cudaEventDestroy(stop);
    return cycles > 0 ? ops / (double)cycles : 0.0;
}}

int main() {{
    const int maxWarps = 64;
    int *d_dummy;
    long long *d_cycles;
    cudaMalloc(&d_dummy, maxWarps * 32 * sizeof(int));
    cudaMalloc(&d_cycles, sizeof(long long));
    printf("x,y\n");
    for (int w = 1; w <= maxWarps; w++) {{
        dim3 Db(32, w), Dg(1);
        printf("%d,%f\n", w, throughput_func(Db, Dg, d_dummy, d_cycles));
    }}
    cudaFree(d_dummy);
    cudaFree(d_cycles);
    return 0;
}}
"#
    ))
}

const LATENCY: &str = r#"const int N = 100;

// One thread; each pair below depends on the previous result.
__global__ void latency_kernel(int *dummy, long long *t_tot) {
    int a = threadIdx.x, b = 1;
    long long total = 0;
    for (int n = 0; n < N; n++) {
        long long start = clock64();
        repeat256(b+=a; a+=b;);
        long long stop = clock64();
        total += stop - start;
    }
    dummy[0] = b+a; //store results to avoid compiler optimization
    *t_tot = total;
}

int main() {
    int *d_dummy;
    long long *d_t, t_tot = 0;
    cudaMalloc(&d_dummy, sizeof(int));
    cudaMalloc(&d_t, sizeof(long long));
    latency_kernel<<<1, 1>>>(d_dummy, d_t);
    cudaMemcpy(&t_tot, d_t, sizeof(long long), cudaMemcpyDeviceToHost);
    // average latency = T_tot / (2 * 256 * N)
    printf("T_tot,N,latency\n%lld,%d,%f\n", t_tot, N, (double)t_tot / (2.0 * 256.0 * N));
    cudaFree(d_dummy);
    cudaFree(d_t);
    return 0;
}
"#;

const GLOBAL_CHASE: &str = r#"const int iterations = 1024;

__global__ void memLatKernel(int *d_dummy, const int *d_arr, long long *d_lat) {
    long long start_time = clock64();
    int j = 0;
    for (int it = 0; it < iterations; it++) {
        j=d_arr[j];
    }
    long long end_time = clock64();
    d_dummy[blockIdx.x*blockDim.x + threadIdx.x] = j;
    if (blockIdx.x == 0 && threadIdx.x == 0) d_lat[0] = (end_time - start_time) / iterations;
}

int main(int argc, char **argv) {
    int nB = argc > 1 ? atoi(argv[1]) : 1;
    int nT = argc > 2 ? atoi(argv[2]) : 1;
    int stride = nB * nT;
    int N = stride * 16;
    int *h_arr = (int *)malloc(N * sizeof(int));
    for (int k = 0; k < N; k++) {
        h_arr[k]=(k+stride) % N;
    }
    int *d_arr, *d_dummy;
    long long *d_lat, lat = 0;
    cudaMalloc(&d_arr, N * sizeof(int));
    cudaMalloc(&d_dummy, stride * sizeof(int));
    cudaMalloc(&d_lat, sizeof(long long));
    cudaMemcpy(d_arr, h_arr, N * sizeof(int), cudaMemcpyHostToDevice);
    memLatKernel<<<nB, nT>>>(d_dummy, d_arr, d_lat);
    cudaMemcpy(&lat, d_lat, sizeof(long long), cudaMemcpyDeviceToHost);
    printf("x,y\n%d,%lld\n", stride, lat);
    cudaFree(d_arr);
    cudaFree(d_dummy);
    cudaFree(d_lat);
    free(h_arr);
    return 0;
}
"#;

const SHARED_CHASE: &str = r#"#define N 1024
const int iterations = 1024;

__global__ void smemLatKernel(int *d_dummy, const int *d_array, long long *d_lat) {
    __shared__ int shdata[N];
    for (int i = 0; i < N; i++) {
        shdata[i] = d_array[i];
    }
    __syncthreads();
    long long start_time = clock64();
    int j = 0;
    for (int it = 0; it < iterations; it++) {
        j=shdata[j];
    }
    long long end_time = clock64();
    d_dummy[0] = j;
    d_lat[0] = (end_time - start_time) / iterations;
}

int main(int argc, char **argv) {
    int stride = argc > 1 ? atoi(argv[1]) : 1;
    int h_arr[N];
    for (int k = 0; k < N; k++) {
        h_arr[k]=(k+stride) % N;
    }
    int *d_arr, *d_dummy;
    long long *d_lat, lat = 0;
    cudaMalloc(&d_arr, N * sizeof(int));
    cudaMalloc(&d_dummy, sizeof(int));
    cudaMalloc(&d_lat, sizeof(long long));
    cudaMemcpy(d_arr, h_arr, N * sizeof(int), cudaMemcpyHostToDevice);
    smemLatKernel<<<1, 1>>>(d_dummy, d_arr, d_lat);
    cudaMemcpy(&lat, d_lat, sizeof(long long), cudaMemcpyDeviceToHost);
    printf("latency\n%lld\n", lat);
    cudaFree(d_arr);
    cudaFree(d_dummy);
    cudaFree(d_lat);
    return 0;
}
"#;

const EMPTY: &str = r#"__global__ void emptyKernel()
{
   // No instructions are executed
}

int main() {
    cudaEvent_t start, stop;
    cudaEventCreate(&start);
    cudaEventCreate(&stop);
    emptyKernel<<<1, 1>>>();
    cudaDeviceSynchronize();
    printf("x,y\n");
    for (int threadsPerBlock = 32; threadsPerBlock <= 1024; threadsPerBlock *= 2) {
        for (int blocksPerGrid = 1; blocksPerGrid <= 4096; blocksPerGrid *= 4) {
            cudaEventRecord(start, 0);
            emptyKernel<<<blocksPerGrid, threadsPerBlock>>>();
            cudaEventRecord(stop, 0);
            cudaEventSynchronize(stop);
            float ms = 0.0f;
            cudaEventElapsedTime(&ms, start, stop);
            printf("%d,%f\n", blocksPerGrid * threadsPerBlock, ms * 1000.0f);
        }
    }
    cudaEventDestroy(start);
    cudaEventDestroy(stop);
    return 0;
}
"#;
