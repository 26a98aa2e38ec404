"""Display-only figure rendering for clfirl experiment CSV exports."""

from .figures import PlotJob, plot_clf_surface, plot_lqr_contours

__all__ = ["PlotJob", "plot_clf_surface", "plot_lqr_contours"]
