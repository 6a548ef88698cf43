from blinker import signal


commandline_prepared = signal('commandline-prepared')
"""Raised when the command line parsing environment was prepared.

  :param click.group cli: The command line group to add commands to.
"""

determinant_computed = signal('determinant-computed')
"""Raised after a Fredholm determinant has been evaluated.

  :param kpzlab.fredholm.DeterminantResult result: the determinant, including
                                                   the doubling gap
  :param str label: a short description of the kernel
"""

trajectory_completed = signal('trajectory-completed')
"""Raised in the coordinating process after a trajectory result has been
collected from a farm.

  :param int index: the trajectory index
  :param str kind: ``asep`` or ``she``
"""

run_finished = signal('run-finished')
"""Raised after a command line run has written its output.

  :param str subcommand: the subcommand name
  :param pathlib.Path path: the main output file
"""
