# core/errors.py
"""Exceptions du moteur DeNIM."""


class DenimError(Exception):
    """Erreur de base de la bibliothèque."""


class ShapeError(DenimError, ValueError):
    """Dimensions incompatibles entre deux opérandes."""


class ParamsFormatError(DenimError):
    """Fichier de paramètres DNIM illisible ou incohérent."""


class ImageFormatError(DenimError):
    """Fichier image illisible."""


class PpmHeaderError(ImageFormatError):
    pass


class PpmTruncatedError(ImageFormatError):
    pass


class PpmMaxvalError(ImageFormatError):
    pass


class UnknownSettingError(DenimError, KeyError):
    """Lettre de réglage WB absente de la configuration de simulation."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class EmptyDatasetError(DenimError, ValueError):
    pass


class ConfigError(DenimError, ValueError):
    """Paramètre de configuration invalide."""
