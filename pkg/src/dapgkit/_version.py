# -*- coding: utf-8 -*-

"""Version information of dapgkit."""

version_info = (0, 3, 0)


def get_versions():
    """
    Return the version information as dictionary.

    :return:
    """
    return {
        "version": ".".join(str(v) for v in version_info),
        "full-revisionid": None,
        "dirty": False,
        "error": None
    }
