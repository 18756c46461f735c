"""Compiled inner loops for the multi-D2 equations of motion.

State vectors are flat complex arrays ``y = [A_0..A_{M-1}, B_0..B_{M-1}, f_00..f_{M-1,N-1}]``.

Notation used below:
    S[k, i]   coherent-state overlap <f_k|f_i>
    rho[k, i] A_k* A_i + B_k* B_i
    P         S * rho (elementwise)

The Dirac-Frenkel equations are the projections of ``i d|psi>/dt = H|psi>`` on
the vectors ``|up, f_k>``, ``|down, f_k>`` and ``(A_k|up> + B_k|down>) b_q^+ |f_k>``.
The time derivative of the state lies in the span of the same vectors with
coefficients ``c``; the projected system is ``G c = h`` with G their Gram matrix.
``c`` maps back to parameter rates by ``fdot = c_f`` and
``Adot = c_A + A * lambda``, ``lambda_i = Re(sum_q f_iq* fdot_iq)``.
"""

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_FALLBACK = 1
STATUS_BREAKDOWN = 2


@njit(cache=True)
def split(y, M, N):
    A = y[:M]
    B = y[M:2 * M]
    F = y[2 * M:].reshape((M, N))
    return A, B, F


@njit(cache=True)
def overlaps(F):
    M, N = F.shape
    nrm = np.zeros(M)
    for i in range(M):
        for q in range(N):
            nrm[i] += F[i, q].real ** 2 + F[i, q].imag ** 2
    S = np.empty((M, M), np.complex128)
    for k in range(M):
        S[k, k] = 1.0
        for i in range(k + 1, M):
            acc = 0j
            for q in range(N):
                acc += F[k, q].conjugate() * F[i, q]
            val = np.exp(acc - 0.5 * (nrm[k] + nrm[i]))
            S[k, i] = val
            S[i, k] = val.conjugate()
    return S


@njit(cache=True)
def amplitude_products(A, B):
    M = A.shape[0]
    rho = np.empty((M, M), np.complex128)
    sig = np.empty((M, M), np.complex128)
    chi = np.empty((M, M), np.complex128)
    for k in range(M):
        ak = A[k].conjugate()
        bk = B[k].conjugate()
        for i in range(M):
            rho[k, i] = ak * A[i] + bk * B[i]
            sig[k, i] = ak * A[i] - bk * B[i]
            chi[k, i] = ak * B[i] + bk * A[i]
    return rho, sig, chi


@njit(cache=True)
def h_projections(A, B, F, S, t, v, delta, omega, cq, sq):
    """Return <up,f_k|H|psi>, <down,f_k|H|psi> and (A_k<up|+B_k<down|)<f_k|b_q H|psi>."""
    M, N = F.shape
    rho, sig, chi = amplitude_products(A, B)
    Fc = np.zeros(M, np.complex128)
    Fs = np.zeros(M, np.complex128)
    for i in range(M):
        for q in range(N):
            Fc[i] += cq[q] * F[i, q]
            Fs[i] += sq[q] * F[i, q]
    drive = 0.5 * v * t
    tun = 0.5 * delta
    hup = np.zeros(M, np.complex128)
    hdn = np.zeros(M, np.complex128)
    hf = np.zeros((M, N), np.complex128)
    for k in range(M):
        sum_sig = 0j
        sum_chi = 0j
        for i in range(M):
            wb = 0j
            for q in range(N):
                wb += omega[q] * F[k, q].conjugate() * F[i, q]
            lc = Fc[i] + Fc[k].conjugate()
            ls = Fs[i] + Fs[k].conjugate()
            s = S[k, i]
            hup[k] += s * (drive * A[i] + tun * B[i] + A[i] * wb + 0.5 * A[i] * lc + 0.5 * B[i] * ls)
            hdn[k] += s * (-drive * B[i] + tun * A[i] + B[i] * wb - 0.5 * B[i] * lc + 0.5 * A[i] * ls)
            e = s * (drive * sig[k, i] + tun * chi[k, i] + rho[k, i] * wb
                     + 0.5 * sig[k, i] * lc + 0.5 * chi[k, i] * ls)
            p = s * rho[k, i]
            for q in range(N):
                hf[k, q] += (e + p * omega[q]) * F[i, q]
            sum_sig += s * sig[k, i]
            sum_chi += s * chi[k, i]
        for q in range(N):
            hf[k, q] += 0.5 * (sum_sig * cq[q] + sum_chi * sq[q])
    return hup, hdn, hf


@njit(cache=True)
def gram(A, B, F, S):
    """Dense Gram matrix of the projection vectors, order [up_k, down_k, (k, q)]."""
    M, N = F.shape
    D = M * (N + 2)
    G = np.zeros((D, D), np.complex128)
    rho, _, _ = amplitude_products(A, B)
    for k in range(M):
        for i in range(M):
            s = S[k, i]
            G[k, i] = s
            G[M + k, M + i] = s
            p = rho[k, i] * s
            for q in range(N):
                col = 2 * M + i * N + q
                G[k, col] = A[i] * F[k, q].conjugate() * s
                G[M + k, col] = B[i] * F[k, q].conjugate() * s
                row = 2 * M + k * N + q
                G[row, i] = A[k].conjugate() * F[i, q] * s
                G[row, M + i] = B[k].conjugate() * F[i, q] * s
            for p_ in range(N):
                row = 2 * M + k * N + p_
                for q in range(N):
                    val = p * F[k, q].conjugate() * F[i, p_]
                    if p_ == q:
                        val += p
                    G[row, 2 * M + i * N + q] = val
    return G


@njit(cache=True)
def _cholesky(G, ridge):
    """Lower factor of ``G + diag(ridge)``. Returns (L, ok, pivot_ratio)."""
    n = G.shape[0]
    L = np.zeros((n, n), np.complex128)
    dmax = 0.0
    dmin = np.inf
    for j in range(n):
        d = G[j, j].real + ridge[j]
        for m in range(j):
            d -= L[j, m].real ** 2 + L[j, m].imag ** 2
        if not d > 0.0:
            return L, False, np.inf
        ljj = np.sqrt(d)
        L[j, j] = ljj
        dmax = max(dmax, ljj)
        dmin = min(dmin, ljj)
        for i in range(j + 1, n):
            acc = G[i, j]
            for m in range(j):
                acc -= L[i, m] * L[j, m].conjugate()
            L[i, j] = acc / ljj
    return L, True, (dmax / dmin) ** 2


@njit(cache=True)
def _cholesky_apply(L, H):
    n = L.shape[0]
    X = H.copy()
    for c in range(X.shape[1]):
        for i in range(n):
            acc = X[i, c]
            for m in range(i):
                acc -= L[i, m] * X[m, c]
            X[i, c] = acc / L[i, i]
        for i in range(n - 1, -1, -1):
            acc = X[i, c]
            for m in range(i + 1, n):
                acc -= L[m, i].conjugate() * X[m, c]
            X[i, c] = acc / L[i, i]
    return X


@njit(cache=True)
def hermitian_solve(G, H, ridge, cutoff, fallback_tol, breakdown_tol, refine):
    """Regularised solve of ``G X = H`` (H holds one system per column).

    ``ridge`` is a vector added to the diagonal. Cholesky of ``G + diag(ridge)``
    first, followed by ``refine`` iterated-Tikhonov
    sweeps; if the factorisation fails or its residual exceeds
    ``fallback_tol``, a truncated eigen-decomposition gives the minimum-norm
    solution with eigenvalues below ``cutoff * max eigenvalue`` dropped.
    Returns ``(X, status, condition_estimate, residual)``.
    """
    n = G.shape[0]
    if n == 0:
        return H.copy(), STATUS_OK, 1.0, 0.0
    hnorm = np.sqrt(np.sum(np.abs(H) ** 2))
    if hnorm == 0.0:
        return np.zeros_like(H), STATUS_OK, 1.0, 0.0
    L, ok, ratio = _cholesky(G, ridge)
    if ok:
        X = _cholesky_apply(L, H)
        R = G @ X - H
        for j in range(n):
            R[j, :] += ridge[j] * X[j, :]
        res = np.sqrt(np.sum(np.abs(R) ** 2)) / hnorm
        # iterated Tikhonov: each sweep sharpens the spectral filter from
        # lam / (lam + ridge) to 1 - (ridge / (lam + ridge))^(sweeps + 1)
        for _ in range(refine):
            X = X + _cholesky_apply(L, H - G @ X)
        if res <= fallback_tol and np.all(np.isfinite(X.real)) and np.all(np.isfinite(X.imag)):
            return X, STATUS_OK, ratio, res
    w, U = np.linalg.eigh(G)
    wmax = np.max(np.abs(w))
    keep = w > cutoff * wmax
    Uk = U[:, keep]
    proj = Uk.conj().T @ H
    wk = w[keep]
    for r in range(proj.shape[0]):
        proj[r, :] /= wk[r]
    X = Uk @ proj
    cond = wmax / max(np.min(np.abs(w)), 1e-300)
    # residual measured inside the retained subspace: the discarded part of H
    # belongs to directions the ansatz cannot represent
    R = Uk.conj().T @ (G @ X - H)
    res = np.sqrt(np.sum(np.abs(R) ** 2)) / hnorm
    status = STATUS_FALLBACK
    if not (res <= breakdown_tol) or not np.all(np.isfinite(X.real)) or not np.all(np.isfinite(X.imag)):
        status = STATUS_BREAKDOWN
    return X, status, cond, res


@njit(cache=True)
def _ridge_vector(ridge_amp, ridge_f, M, r):
    out = np.empty(2 * M + M * r)
    out[:2 * M] = ridge_amp
    for k in range(M):
        out[2 * M + k * r:2 * M + (k + 1) * r] = ridge_f[k]
    return out


@njit(cache=True)
def rates(y, M, N, t, v, delta, omega, cq, sq, opts):
    """Parameter time derivatives at ``(y, t)``.

    ``opts = [eps, cutoff, fallback_tol, breakdown_tol, structured, norm_fix, refine,
    per_configuration]``. With ``per_configuration`` the ridge on the
    displacement rates of configuration k is ``eps * max(1, d_k)`` with
    ``d_k = P_kk (1 + max_q |f_kq|^2)`` its own Gram diagonal scale; otherwise
    every row gets ``eps * max(1, max_k d_k)``. Either way the ridge is a
    multiple of the identity inside each configuration's block, which keeps
    the reduction to span{f_i} exact.
    Returns ``(ydot, info)`` with ``info = [status, condition, residual, dnorm]``
    where ``dnorm`` is the norm rate implied by ``ydot``.
    """
    eps = opts[0]
    cutoff = opts[1]
    fallback_tol = opts[2]
    breakdown_tol = opts[3]
    structured = opts[4] != 0.0
    norm_fix = opts[5] != 0.0
    refine = int(opts[6])
    per_config = opts[7] != 0.0
    if not np.all(np.isfinite(y)):
        return np.full(y.shape[0], np.nan + 0j), np.array([float(STATUS_BREAKDOWN), np.inf, np.inf, np.nan])
    A, B, F = split(y, M, N)
    S = overlaps(F)
    rho, _, _ = amplitude_products(A, B)
    P = S * rho
    hup, hdn, hf = h_projections(A, B, F, S, t, v, delta, omega, cq, sq)
    hA = -1j * hup
    hB = -1j * hdn
    hF = -1j * hf

    dk = np.ones(M)
    for k in range(M):
        fk = 0.0
        for q in range(N):
            fk = max(fk, F[k, q].real ** 2 + F[k, q].imag ** 2)
        dk[k] = max(1.0, P[k, k].real * (1.0 + fk))
    if per_config:
        ridge_amp = eps
        ridge_f = eps * dk
    else:
        ridge_amp = eps * np.max(dk)
        ridge_f = np.full(M, ridge_amp)

    status = STATUS_OK
    cond = 1.0
    res = 0.0
    cA = np.empty(M, np.complex128)
    cB = np.empty(M, np.complex128)
    cF = np.empty((M, N), np.complex128)
    if structured and N > M:
        # Orthonormal basis Q of span{f_i}: on its complement the f-block of G
        # is P (x) identity and decouples from everything else.
        Q, _ = np.linalg.qr(np.ascontiguousarray(F.T))
        Qc = np.ascontiguousarray(Q.conj())
        Fr = np.ascontiguousarray(F @ Qc)
        hr = np.ascontiguousarray(hF @ Qc)
        r = Fr.shape[1]
        G = gram(A, B, Fr, S)
        h = np.empty((2 * M + M * r, 1), np.complex128)
        h[:M, 0] = hA
        h[M:2 * M, 0] = hB
        h[2 * M:, 0] = hr.ravel()
        X, st1, c1, r1 = hermitian_solve(G, h, _ridge_vector(ridge_amp, ridge_f, M, r), cutoff,
                                         fallback_tol, breakdown_tol, refine)
        hperp = np.ascontiguousarray(hF - hr @ np.ascontiguousarray(Q.T))
        Y, st2, c2, r2 = hermitian_solve(P, hperp, ridge_f.copy(), cutoff, fallback_tol, breakdown_tol,
                                         refine)
        status = max(st1, st2)
        cond = max(c1, c2)
        res = max(r1, r2)
        cA[:] = X[:M, 0]
        cB[:] = X[M:2 * M, 0]
        cF[:, :] = np.ascontiguousarray(X[2 * M:, 0]).reshape((M, r)) @ np.ascontiguousarray(Q.T) + Y
    else:
        G = gram(A, B, F, S)
        h = np.empty((M * (N + 2), 1), np.complex128)
        h[:M, 0] = hA
        h[M:2 * M, 0] = hB
        h[2 * M:, 0] = hF.ravel()
        X, status, cond, res = hermitian_solve(G, h, _ridge_vector(ridge_amp, ridge_f, M, N), cutoff,
                                               fallback_tol, breakdown_tol, refine)
        cA[:] = X[:M, 0]
        cB[:] = X[M:2 * M, 0]
        cF[:, :] = np.ascontiguousarray(X[2 * M:, 0]).reshape((M, N))

    # G w with w = (A, B, 0): the coordinates of psi itself in the projection basis
    gwA = S @ A
    gwB = S @ B
    gwF = P @ F
    norm = 0.0
    for k in range(M):
        norm += (A[k].conjugate() * gwA[k] + B[k].conjugate() * gwB[k]).real
    wGc = 0j
    wh = 0j
    for k in range(M):
        wGc += gwA[k].conjugate() * cA[k] + gwB[k].conjugate() * cB[k]
        wh += A[k].conjugate() * hA[k] + B[k].conjugate() * hB[k]
        for q in range(N):
            wGc += gwF[k, q].conjugate() * cF[k, q]
    if norm_fix and norm > 0.0:
        # restore the exact equation along psi, which regularisation perturbs
        mu = (wh - wGc) / norm
        for k in range(M):
            cA[k] += mu * A[k]
            cB[k] += mu * B[k]
        wGc = wh
    dnorm = 2.0 * wGc.real

    ydot = np.empty(M * (N + 2), np.complex128)
    for i in range(M):
        lam = 0.0
        for q in range(N):
            lam += (F[i, q].conjugate() * cF[i, q]).real
        ydot[i] = cA[i] + A[i] * lam
        ydot[M + i] = cB[i] + B[i] * lam
        for q in range(N):
            ydot[2 * M + i * N + q] = cF[i, q]
    info = np.array([float(status), cond, res, dnorm])
    return ydot, info


@njit(cache=True)
def norm_of(y, M, N):
    A, B, F = split(y, M, N)
    S = overlaps(F)
    acc = 0j
    for k in range(M):
        for i in range(M):
            acc += (A[k].conjugate() * A[i] + B[k].conjugate() * B[i]) * S[k, i]
    return acc.real


ADV_OK = 0
ADV_BREAKDOWN = 1
ADV_NONFINITE = 2
ADV_DRIFT = 3


@njit(cache=True)
def advance(y, M, N, t_start, dt, k0, nsteps, v, delta, omega, cq, sq, opts, drift_abort):
    """Classical RK4 from grid index ``k0`` for ``nsteps`` steps of size ``dt``.

    Step ``k`` starts at ``t_start + k dt``; stages are evaluated at their own
    times. Stops early on breakdown, non-finite values or norm drift.
    Returns ``(y, steps_done, flag, stats)`` with
    ``stats = [max condition, max residual, fallback count, max |norm - 1|]``.
    """
    stats = np.zeros(4)
    stats[0] = 1.0
    for n in range(nsteps):
        t = t_start + (k0 + n) * dt
        k1, i1 = rates(y, M, N, t, v, delta, omega, cq, sq, opts)
        k2, i2 = rates(y + 0.5 * dt * k1, M, N, t + 0.5 * dt, v, delta, omega, cq, sq, opts)
        k3, i3 = rates(y + 0.5 * dt * k2, M, N, t + 0.5 * dt, v, delta, omega, cq, sq, opts)
        k4, i4 = rates(y + dt * k3, M, N, t + dt, v, delta, omega, cq, sq, opts)
        for info in (i1, i2, i3, i4):
            stats[0] = max(stats[0], info[1])
            stats[1] = max(stats[1], info[2])
            if info[0] >= STATUS_FALLBACK:
                stats[2] += 1
            if info[0] >= STATUS_BREAKDOWN:
                return y, n, ADV_BREAKDOWN, stats
        ynew = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not (np.all(np.isfinite(ynew.real)) and np.all(np.isfinite(ynew.imag))):
            return y, n, ADV_NONFINITE, stats
        drift = abs(norm_of(ynew, M, N) - 1.0)
        if not drift <= drift_abort:
            return y, n, ADV_DRIFT, stats
        stats[3] = max(stats[3], drift)
        y = ynew
    return y, nsteps, ADV_OK, stats
