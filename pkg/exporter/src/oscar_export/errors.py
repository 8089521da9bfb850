class ExportError(Exception):
    exit_code = 1


class LayerNotFound(ExportError):
    exit_code = 50


class CheckpointMismatch(ExportError):
    exit_code = 51
