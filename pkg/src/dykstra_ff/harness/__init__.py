"""File formats, experiment drivers and the command-line front end."""
