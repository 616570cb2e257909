# Third-party
from lxml import etree  # http://lxml.de/


class ElementNotFound(Exception):
    pass


class XMLHelper(object):

    @staticmethod
    def parse(data):
        """Parses an XML document given as bytes or string.

        Raises:
            An etree.XMLSyntaxError when the document is malformed.
        """
        if isinstance(data, str):
            data = data.encode('utf-8')
        return etree.fromstring(data, parser=etree.XMLParser(remove_blank_text=True))

    @staticmethod
    def read(path):
        """Parses the XML file at path."""
        with open(path, 'rb') as f:
            return XMLHelper.parse(f.read())

    @staticmethod
    def to_bytes(root):
        """Serializes an element tree into pretty printed UTF-8 bytes with a declaration."""
        return etree.tostring(root, pretty_print=True, xml_declaration=True, encoding='utf-8')

    @classmethod
    def write(cls, root, path):
        with open(path, 'wb') as f:
            f.write(cls.to_bytes(root))

    @staticmethod
    def sub(parent, tag, text=None, **attrib):
        """Appends a child element; attribute values and text are converted to strings."""
        elem = etree.SubElement(parent, tag, dict((k, str(v)) for k, v in attrib.items()))
        if text is not None:
            elem.text = str(text)
        return elem

    @classmethod
    def get_elements(cls, path, node):
        """Finds all the elements matching the dotted path starting from the node.

        Args:
            path: the dotted path of the elements to seek, relative to node
            node: the node from which to seek

        Returns:
            A list of elements
        """
        return node.findall(path.replace('.', '/'))

    @classmethod
    def get_element(cls, node, path):
        """Gets the first element matching the dotted path.

        Raises:
            An ElementNotFound exception when no element matches.
        """
        elem = node.find(path.replace('.', '/'))
        if elem is None:
            raise ElementNotFound('%s not found in the element <%s>' % (path, node.tag))
        return elem

    @classmethod
    def get_text(cls, element, tag=None):
        """Get the text value of the first tag found in an element or the text value of the element itself.

        Args:
            element: a node element
            tag: the tag to look for

        Returns:
            A string.

        Raises:
            An ElementNotFound exception when the tag cannot be found in the element.
        """
        if tag is not None:
            text = element.findtext(tag.replace('.', '/'))
            if text is not None:
                return text
            else:
                raise ElementNotFound('%s not found in the element <%s>' % (tag, element.tag))

        return element.text or ''

    @staticmethod
    def get_attr(element, name, convert=str):
        """Gets and converts an attribute of an element.

        Raises:
            An ElementNotFound exception when the attribute is missing.
        """
        value = element.get(name)
        if value is None:
            raise ElementNotFound('Attribute %s not found in the element <%s>' % (name, element.tag))
        return convert(value)
