"""Exception hierarchy shared by all modules."""


class SitnikovError(Exception):
    """Base class for every error raised by the package."""


class KeplerSolverError(SitnikovError):
    def __init__(self, t, e, residual):
        super().__init__(
            f"Kepler solver did not converge at t={t!r}, e={e!r} "
            f"(last residual {residual:.3e})"
        )
        self.t = t
        self.e = e
        self.residual = residual


class DomainError(SitnikovError, ValueError):
    """Argument outside the range where a quantity is defined."""


class IntegrationError(SitnikovError):
    def __init__(self, message, t_last):
        super().__init__(f"{message} (last accepted time {t_last:.6g})")
        self.t_last = t_last


class CatalogError(SitnikovError):
    def __init__(self, message, p=None):
        super().__init__(message if p is None else f"branch p={p}: {message}")
        self.p = p


class LedgerError(SitnikovError):
    """A bound in the quantification chain could not be established."""


class NearFoldError(SitnikovError):
    def __init__(self, e, xi, dF_dxi):
        super().__init__(
            f"d F/d xi = {dF_dxi:.3e} below threshold at e={e:.6g}, xi={xi:.12g}"
        )
        self.e = e
        self.xi = xi
        self.dF_dxi = dF_dxi


class CertificationError(SitnikovError):
    def __init__(self, message, e=None, xi=None):
        super().__init__(message)
        self.e = e
        self.xi = xi


class TheoremAuditError(SitnikovError):
    """The amplitude bound was violated; this signals a numerical bug."""


class StabilityError(SitnikovError):
    """Raised when the discriminant fit or branch lookup cannot proceed."""
