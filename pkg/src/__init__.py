# trace-posets: forbidden subposets in traces of set families
__version__ = "0.1.0"
